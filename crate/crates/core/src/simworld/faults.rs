//! Scripted failures: crashes, reboots, connectivity loss and delivery faults.

use std::collections::HashMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::types::EntityId;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    Crash,
    Reboot,
    NetDown,
    NetUp,
    DupDelivery,
    DropDelivery,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaultEntry {
    pub t: f64,
    pub entity: EntityId,
    pub kind: FaultKind,
}

/// Time-sorted fault schedule. Per entity, `net_down` and `net_up` alternate
/// starting with `net_down`.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct FaultPlan {
    #[serde(rename = "fault")]
    entries: Vec<FaultEntry>,
}

#[derive(Deserialize)]
struct FaultFile {
    #[serde(default)]
    fault: Vec<FaultEntry>,
}

/// How many faults of each class [`FaultPlan::generate`] scatters over a cohort.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FaultMix {
    pub crashes: usize,
    pub reboots: usize,
    pub outages: usize,
    pub outage_max_s: f64,
    pub duplicates: usize,
    pub drops: usize,
}

impl Default for FaultMix {
    fn default() -> Self {
        FaultMix {
            crashes: 60,
            reboots: 20,
            outages: 40,
            outage_max_s: 6.0 * 3600.0,
            duplicates: 60,
            drops: 60,
        }
    }
}

impl FaultPlan {
    pub fn empty() -> Self {
        FaultPlan::default()
    }

    pub fn new(entries: Vec<FaultEntry>) -> Result<Self> {
        let plan = FaultPlan { entries };
        plan.validate()?;
        Ok(plan)
    }

    /// Sort entries by time (stable) before validating.
    pub fn from_unsorted(mut entries: Vec<FaultEntry>) -> Result<Self> {
        entries.sort_by(|a, b| a.t.total_cmp(&b.t));
        Self::new(entries)
    }

    pub fn entries(&self) -> &[FaultEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        for pair in self.entries.windows(2) {
            if pair[1].t < pair[0].t {
                return Err(Error::Config(format!(
                    "fault plan not sorted: {} after {}",
                    pair[1].t, pair[0].t
                )));
            }
        }
        let mut net_down: HashMap<&EntityId, bool> = HashMap::new();
        for e in &self.entries {
            if !e.t.is_finite() || e.t < 0.0 {
                return Err(Error::Config(format!("fault time {} out of range", e.t)));
            }
            let down = net_down.entry(&e.entity).or_insert(false);
            match e.kind {
                FaultKind::NetDown if *down => {
                    return Err(Error::Config(format!("{}: net_down while down at {}", e.entity, e.t)))
                }
                FaultKind::NetUp if !*down => {
                    return Err(Error::Config(format!("{}: net_up while up at {}", e.entity, e.t)))
                }
                FaultKind::NetDown => *down = true,
                FaultKind::NetUp => *down = false,
                _ => {}
            }
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let file: FaultFile = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        Self::new(file.fault)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("fault plan serializes")
    }

    /// Scatter the faults of `mix` uniformly over `entities` and `[0, horizon_s)`.
    pub fn generate(entities: &[EntityId], horizon_s: f64, mix: &FaultMix, seed: u64) -> Self {
        let mut entries = Vec::new();
        if entities.is_empty() || horizon_s <= 0.0 {
            return FaultPlan { entries };
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(7);
        let pick = |rng: &mut ChaCha8Rng| entities[rng.random_range(0..entities.len())].clone();
        for (kind, count) in [
            (FaultKind::Crash, mix.crashes),
            (FaultKind::Reboot, mix.reboots),
            (FaultKind::DupDelivery, mix.duplicates),
            (FaultKind::DropDelivery, mix.drops),
        ] {
            for _ in 0..count {
                let entity = pick(&mut rng);
                entries.push(FaultEntry {
                    t: rng.random_range(0.0..horizon_s),
                    entity,
                    kind,
                });
            }
        }
        let mut starts: HashMap<EntityId, Vec<f64>> = HashMap::new();
        for _ in 0..mix.outages {
            let entity = pick(&mut rng);
            starts
                .entry(entity)
                .or_default()
                .push(rng.random_range(0.0..horizon_s));
        }
        let mut owners: Vec<_> = starts.into_iter().collect();
        owners.sort_by(|a, b| a.0.cmp(&b.0));
        for (entity, mut times) in owners {
            times.sort_by(f64::total_cmp);
            for (i, &start) in times.iter().enumerate() {
                let limit = times.get(i + 1).copied().unwrap_or(horizon_s);
                let len = rng.random_range(60.0..mix.outage_max_s.max(61.0));
                let end = (start + len).min((limit + start) / 2.0).max(start + 1e-3);
                entries.push(FaultEntry {
                    t: start,
                    entity: entity.clone(),
                    kind: FaultKind::NetDown,
                });
                entries.push(FaultEntry {
                    t: end,
                    entity: entity.clone(),
                    kind: FaultKind::NetUp,
                });
            }
        }
        entries.sort_by(|a, b| a.t.total_cmp(&b.t));
        let plan = FaultPlan { entries };
        debug_assert!(plan.validate().is_ok());
        plan
    }
}
