//! Per-entity learning table: one row per report, encoding where and when.

use serde::{Deserialize, Serialize};

use super::store::MemoryStore;
use super::transform::transform_upsample;
use crate::error::{Error, Result};
use crate::learn::ClusterModel;
use crate::simworld::{day_of_week, EntityId, Event, HourBand, Point};

/// Maps a (cluster, timestamp) context to a feature vector.
///
/// Layout: one-hot over clusters plus a trailing noise slot, one-hot over
/// the three hour bands, day of week scaled to `[0, 1]`, weekend flag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureEncoder {
    pub n_clusters: usize,
    pub start_weekday: u32,
}

impl FeatureEncoder {
    pub fn dim(&self) -> usize {
        self.n_clusters + 1 + 3 + 2
    }

    pub fn names(&self) -> Vec<String> {
        let mut names: Vec<String> = (0..self.n_clusters).map(|c| format!("cluster_{c}")).collect();
        names.push("cluster_noise".into());
        names.extend(["band_morning", "band_afternoon", "band_night", "day_of_week", "weekend"].map(String::from));
        names
    }

    pub fn encode(&self, cluster: Option<usize>, t: f64) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        match cluster {
            Some(c) if c < self.n_clusters => x[c] = 1.0,
            _ => x[self.n_clusters] = 1.0,
        }
        let base = self.n_clusters + 1;
        x[base + HourBand::of(t).index()] = 1.0;
        let dow = day_of_week(t, self.start_weekday);
        x[base + 3] = dow as f64 / 6.0;
        x[base + 4] = if dow >= 5 { 1.0 } else { 0.0 };
        x
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub entity_id: EntityId,
    pub x: Vec<Vec<f64>>,
    /// Class indices, see [`crate::simworld::Valence::index`].
    pub y: Vec<usize>,
    pub class_counts: [usize; 3],
    pub feature_names: Vec<String>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Rows at `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let x: Vec<Vec<f64>> = idx.iter().map(|&i| self.x[i].clone()).collect();
        let y: Vec<usize> = idx.iter().map(|&i| self.y[i]).collect();
        let mut class_counts = [0; 3];
        for &c in &y {
            class_counts[c] += 1;
        }
        Dataset {
            entity_id: self.entity_id.clone(),
            x,
            y,
            class_counts,
            feature_names: self.feature_names.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetOptions {
    pub grid_s: f64,
    /// Longest gap a missing position may be carried across.
    pub fill_gap_s: f64,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        DatasetOptions {
            grid_s: 60.0,
            fill_gap_s: 1800.0,
        }
    }
}

/// Every position fix in a log, for fitting the entity's cluster model.
pub fn located_points(events: &[Event]) -> Vec<Point> {
    events.iter().filter_map(|e| e.location).collect()
}

/// Build the table from a time-ordered log. Reports without a fix borrow
/// the upsampled position series; if that is missing too, the row is dropped.
pub fn build_dataset_from_events(
    entity_id: &EntityId,
    events: &[Event],
    clusters: &ClusterModel,
    encoder: &FeatureEncoder,
    options: &DatasetOptions,
) -> Result<Dataset> {
    let series: Vec<(f64, Point)> = events.iter().filter_map(|e| Some((e.t, e.location?))).collect();
    let grid = transform_upsample(&series, options.grid_s, options.fill_gap_s)?;
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut class_counts = [0usize; 3];
    for e in events {
        let Some(valence) = e.valence() else { continue };
        let Some(location) = e.location.or_else(|| grid.value_at(e.t).copied()) else {
            continue;
        };
        x.push(encoder.encode(clusters.assign(&location), e.t));
        y.push(valence.index());
        class_counts[valence.index()] += 1;
    }
    if y.is_empty() {
        return Err(Error::EmptyDataset(entity_id.to_string()));
    }
    Ok(Dataset {
        entity_id: entity_id.clone(),
        x,
        y,
        class_counts,
        feature_names: encoder.names(),
    })
}

pub fn build_dataset(
    store: &MemoryStore,
    entity_id: &EntityId,
    clusters: &ClusterModel,
    encoder: &FeatureEncoder,
    options: &DatasetOptions,
) -> Result<Dataset> {
    let events = store
        .export(entity_id)
        .ok_or_else(|| Error::NotFound(format!("entity {entity_id}")))?;
    build_dataset_from_events(entity_id, &events, clusters, encoder, options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simworld::{Payload, Valence};
    use uuid::Uuid;

    fn encoder() -> FeatureEncoder {
        // day zero is a Monday
        FeatureEncoder { n_clusters: 2, start_weekday: 0 }
    }

    #[test]
    fn tuesday_morning_at_home() {
        let t = 86_400.0 + 9.0 * 3600.0;
        let x = encoder().encode(Some(0), t);
        assert_eq!(x, vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0 / 6.0, 0.0]);
        assert_eq!(encoder().names().len(), x.len());
    }

    #[test]
    fn noise_goes_to_the_noise_slot() {
        let x = encoder().encode(None, 5.0 * 86_400.0 + 20.0 * 3600.0);
        assert_eq!(&x[..3], &[0.0, 0.0, 1.0]);
        assert_eq!(x[5], 1.0, "night band");
        assert_eq!(x[7], 1.0, "saturday is weekend");
    }

    fn report(i: u128, t: f64, loc: Option<Point>, v: Valence) -> Event {
        Event {
            uuid: Uuid::from_u128(i),
            entity_id: EntityId::from("e"),
            t,
            location: loc,
            payload: Payload::Report { valence: v },
        }
    }

    #[test]
    fn missing_fix_is_filled_or_dropped() {
        let model = ClusterModel::from_exemplars(vec![Point::new(0.0, 0.0)], vec![0], vec![10.0]);
        let home = Some(Point::new(0.0, 0.0));
        let events = vec![
            report(1, 0.0, home, Valence::Positive),
            report(2, 300.0, None, Valence::Negative),
            report(3, 50_000.0, None, Valence::Neutral),
            report(4, 60_000.0, home, Valence::Neutral),
        ];
        let enc = FeatureEncoder { n_clusters: 1, start_weekday: 0 };
        let d = build_dataset_from_events(&EntityId::from("e"), &events, &model, &enc, &DatasetOptions::default()).unwrap();
        assert_eq!(d.y, vec![2, 0, 1]);
        assert_eq!(d.class_counts, [1, 1, 1]);
        assert_eq!(d.x.len(), d.class_counts.iter().sum::<usize>());
        let again = build_dataset_from_events(&EntityId::from("e"), &events, &model, &enc, &DatasetOptions::default()).unwrap();
        assert_eq!(serde_json::to_string(&d).unwrap(), serde_json::to_string(&again).unwrap());
    }

    #[test]
    fn no_usable_rows_is_an_error() {
        let model = ClusterModel::from_exemplars(vec![], vec![], vec![]);
        let r = build_dataset_from_events(&EntityId::from("e"), &[], &model, &encoder(), &DatasetOptions::default());
        assert!(matches!(r, Err(Error::EmptyDataset(_))));
    }
}
