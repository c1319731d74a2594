//! Duty-cycled sensing rhythm and its energy accounting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeedConfig {
    pub active_s: f64,
    pub inactive_s: f64,
    /// Sampling frequency inside the active window.
    pub sample_hz: f64,
    pub energy_per_active_second: f64,
    /// Battery capacity in the same abstract units as `energy_per_active_second`.
    pub battery_capacity: f64,
}

impl Default for FeedConfig {
    fn default() -> Self {
        FeedConfig {
            active_s: 2.0,
            inactive_s: 8.0,
            sample_hz: 0.2,
            energy_per_active_second: 1.0,
            // 17 280 active seconds per day at 20% duty is 1% of this
            battery_capacity: 1_728_000.0,
        }
    }
}

impl FeedConfig {
    pub fn period(&self) -> f64 {
        self.active_s + self.inactive_s
    }

    pub fn duty_cycle(&self) -> f64 {
        self.active_s / self.period()
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("active_s", self.active_s),
            ("inactive_s", self.inactive_s),
            ("sample_hz", self.sample_hz),
            ("energy_per_active_second", self.energy_per_active_second),
            ("battery_capacity", self.battery_capacity),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("feed.{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Seconds of active sensing inside `[from, to)`. Periods start at t = 0.
    pub fn active_seconds(&self, from: f64, to: f64) -> f64 {
        if to <= from {
            return 0.0;
        }
        let cumulative = |t: f64| {
            let p = self.period();
            let k = (t / p).floor();
            k * self.active_s + (t - k * p).min(self.active_s)
        };
        cumulative(to) - cumulative(from)
    }

    /// Sample instants inside `[from, to)`: `k·period + j/sample_hz` for every
    /// `j` that still falls inside the active window.
    pub fn sample_times(&self, from: f64, to: f64) -> Vec<f64> {
        let mut out = Vec::new();
        if to <= from {
            return out;
        }
        let p = self.period();
        let step = 1.0 / self.sample_hz;
        let per_window = (self.active_s * self.sample_hz).ceil().max(1.0) as usize;
        let mut k = (from / p).floor();
        while k * p < to {
            for j in 0..per_window {
                let offset = j as f64 * step;
                if offset >= self.active_s {
                    break;
                }
                let t = k * p + offset;
                if t >= from && t < to {
                    out.push(t);
                }
            }
            k += 1.0;
        }
        out
    }
}

/// What one feed tick produced.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeedTick {
    pub sample_times: Vec<f64>,
    pub active_s: f64,
    pub energy: f64,
}
