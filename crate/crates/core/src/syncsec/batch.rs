//! The transactional half of sync: batches are built without touching the
//! pending set, and only an ack moves their records to synced.

use serde::{Deserialize, Serialize};

use crate::agent::LocalStore;
use crate::simworld::{EntityId, Event};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyncBatch {
    pub batch_id: u64,
    pub entity_id: EntityId,
    pub created_at: f64,
    pub records: Vec<Event>,
}

/// Up to `max_records` of the oldest pending records, or `None` if nothing is pending.
pub fn make_batch(
    store: &mut LocalStore,
    entity_id: &EntityId,
    max_records: usize,
    now: f64,
) -> Option<SyncBatch> {
    let (batch_id, records) = store.open_batch(max_records)?;
    Some(SyncBatch {
        batch_id,
        entity_id: entity_id.clone(),
        created_at: now,
        records,
    })
}

/// Mark the records of `batch_id` as synced; returns how many moved.
pub fn handle_ack(store: &mut LocalStore, batch_id: u64, now: f64) -> usize {
    store.ack(batch_id, now).marked()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simworld::{Payload, Point, Valence};
    use proptest::prelude::*;
    use uuid::Uuid;

    fn report(i: u128, t: f64) -> Event {
        Event {
            uuid: Uuid::from_u128(i),
            entity_id: EntityId::from("e001"),
            t,
            location: Some(Point::new(1.0, 2.0)),
            payload: Payload::Report { valence: Valence::Neutral },
        }
    }

    fn fresh() -> LocalStore {
        LocalStore::new(72.0, 60.0, 50.0)
    }

    #[test]
    fn empty_store_gives_no_batch() {
        assert!(make_batch(&mut fresh(), &EntityId::from("e001"), 10, 0.0).is_none());
    }

    #[test]
    fn three_pending_stay_pending() {
        let mut s = fresh();
        for i in 0..3 {
            s.push(report(i, i as f64));
        }
        let b = make_batch(&mut s, &EntityId::from("e001"), 10, 5.0).unwrap();
        assert_eq!(b.records.len(), 3);
        assert_eq!(s.pending_len(), 3);
        assert_eq!(handle_ack(&mut s, b.batch_id, 6.0), 3);
        assert_eq!(handle_ack(&mut s, b.batch_id, 6.0), 0);
        assert_eq!(handle_ack(&mut s, 42, 6.0), 0);
    }

    #[test]
    fn batch_ids_increase() {
        let mut s = fresh();
        s.push(report(0, 0.0));
        let a = make_batch(&mut s, &EntityId::from("e001"), 1, 0.0).unwrap();
        let b = make_batch(&mut s, &EntityId::from("e001"), 1, 0.0).unwrap();
        assert!(b.batch_id > a.batch_id);
    }

    proptest! {
        #[test]
        fn batch_is_the_oldest_records(times in proptest::collection::vec(0.0f64..1e5, 0..40), max in 1usize..15) {
            let mut s = fresh();
            for (i, t) in times.iter().enumerate() {
                s.push(report(i as u128, *t));
            }
            let mut oracle: Vec<(f64, usize)> = times.iter().copied().zip(0..).collect();
            oracle.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            oracle.truncate(max);
            match make_batch(&mut s, &EntityId::from("e001"), max, 0.0) {
                None => prop_assert!(times.is_empty()),
                Some(b) => {
                    let got: Vec<u128> = b.records.iter().map(|e| e.uuid.as_u128()).collect();
                    let want: Vec<u128> = oracle.iter().map(|(_, i)| *i as u128).collect();
                    prop_assert_eq!(got, want);
                    prop_assert_eq!(s.pending_len(), times.len());
                }
            }
        }
    }
}
