//! Sync retry cadence: tighten the interval while offline, relax once a sync succeeds.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SyncOutcome {
    Ok,
    NoConnectivity,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyncScheduler {
    pub base_interval_min: f64,
    pub current_interval_min: f64,
    pub floor_min: f64,
}

impl Default for SyncScheduler {
    fn default() -> Self {
        SyncScheduler::new(15.0, 1.0)
    }
}

impl SyncScheduler {
    pub fn new(base_interval_min: f64, floor_min: f64) -> Self {
        SyncScheduler {
            base_interval_min,
            current_interval_min: base_interval_min,
            floor_min,
        }
    }

    /// Apply `outcome` and return the minutes until the next attempt.
    pub fn next_sync_interval(&mut self, outcome: SyncOutcome) -> f64 {
        self.current_interval_min = match outcome {
            SyncOutcome::Ok => self.base_interval_min,
            SyncOutcome::NoConnectivity => (self.current_interval_min / 2.0).max(self.floor_min),
        };
        self.current_interval_min
    }
}
