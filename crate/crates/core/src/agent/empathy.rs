//! Rapport score shown to the human: exponential decay plus a bump per report.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpathyState {
    pub score: f64,
    pub half_life_h: f64,
    pub last_update: f64,
    pub increment_per_report: f64,
}

impl Default for EmpathyState {
    fn default() -> Self {
        EmpathyState {
            score: 50.0,
            half_life_h: 48.0,
            last_update: 0.0,
            increment_per_report: 5.0,
        }
    }
}

impl EmpathyState {
    /// Decay to `now`, add `reports` increments, clamp to `[0, 100]`.
    ///
    /// A `now` earlier than the last update is treated as no elapsed time.
    pub fn update(&mut self, now: f64, reports: u32) -> f64 {
        let dt_h = (now - self.last_update).max(0.0) / 3600.0;
        let decayed = self.score * (-dt_h / self.half_life_h).exp2();
        self.score = (decayed + reports as f64 * self.increment_per_report).clamp(0.0, 100.0);
        self.last_update = self.last_update.max(now);
        self.score
    }
}
