//! On-device record store: pending and synced partitions, consecutive-duplicate
//! forgetting for sensor readings, the report debounce slot, and batch/ack
//! bookkeeping for sync.

use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use uuid::Uuid;

use crate::simworld::{Activity, Event, Payload};

/// Ordering key for pending records: timestamp, then insertion sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct RecordKey {
    t_bits: u64,
    seq: u64,
}

impl RecordKey {
    fn new(t: f64, seq: u64) -> Self {
        // timestamps are non-negative, so the IEEE bit pattern orders like the value
        RecordKey {
            t_bits: t.max(0.0).to_bits(),
            seq,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyncedRecord {
    pub event: Event,
    pub acked_at: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DedupeOutcome {
    Stored,
    Forgotten,
}

/// Result of feeding one click into the debounce slot.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ClickOutcome {
    /// The previously held click, replaced by this one.
    pub superseded: Option<Uuid>,
    /// A held click that aged out of its window and was written to the store.
    pub committed: Option<Event>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AckOutcome {
    Marked(usize),
    Repeated,
    Unknown,
}

impl AckOutcome {
    pub fn marked(self) -> usize {
        match self {
            AckOutcome::Marked(n) => n,
            _ => 0,
        }
    }
}

type SensorKey = (Activity, (i64, i64));

#[derive(Clone, Debug)]
pub struct LocalStore {
    pending: BTreeMap<RecordKey, Event>,
    synced: Vec<SyncedRecord>,
    pub persistence_limit_h: f64,
    pub debounce_s: f64,
    pub dedupe_cell_m: f64,
    seq: u64,
    last_sensor: Option<SensorKey>,
    held: Option<Event>,
    outstanding: BTreeMap<u64, Vec<RecordKey>>,
    acked: BTreeSet<u64>,
    next_batch_id: u64,
    committed: Vec<Uuid>,
    forgotten: u64,
    superseded: u64,
}

impl LocalStore {
    pub fn new(persistence_limit_h: f64, debounce_s: f64, dedupe_cell_m: f64) -> Self {
        LocalStore {
            pending: BTreeMap::new(),
            synced: Vec::new(),
            persistence_limit_h,
            debounce_s,
            dedupe_cell_m,
            seq: 0,
            last_sensor: None,
            held: None,
            outstanding: BTreeMap::new(),
            acked: BTreeSet::new(),
            next_batch_id: 1,
            committed: Vec::new(),
            forgotten: 0,
            superseded: 0,
        }
    }

    /// Write a record to `pending` unconditionally.
    pub fn push(&mut self, event: Event) {
        self.committed.push(event.uuid);
        let key = RecordKey::new(event.t, self.seq);
        self.seq += 1;
        self.pending.insert(key, event);
    }

    fn sensor_key(&self, event: &Event) -> Option<SensorKey> {
        match (&event.payload, event.location) {
            (Payload::Sensor { activity }, Some(p)) => Some((*activity, p.cell(self.dedupe_cell_m))),
            (Payload::Sensor { activity }, None) => Some((*activity, (i64::MIN, i64::MIN))),
            _ => None,
        }
    }

    /// Store a sensor reading unless it repeats the previous stored reading's
    /// activity and location cell. Non-sensor events are always stored.
    pub fn dedupe_store(&mut self, event: Event) -> DedupeOutcome {
        let Some(key) = self.sensor_key(&event) else {
            self.push(event);
            return DedupeOutcome::Stored;
        };
        if self.last_sensor == Some(key) {
            self.forgotten += 1;
            return DedupeOutcome::Forgotten;
        }
        self.last_sensor = Some(key);
        self.push(event);
        DedupeOutcome::Stored
    }

    /// Feed a report click into the debounce slot.
    ///
    /// A click within `debounce_s` of the held click replaces it. Otherwise
    /// the held click is committed and the new one is held.
    pub fn click(&mut self, event: Event) -> ClickOutcome {
        let mut out = ClickOutcome::default();
        if let Some(held) = self.held.take() {
            if event.t - held.t < self.debounce_s {
                self.superseded += 1;
                out.superseded = Some(held.uuid);
            } else {
                out.committed = Some(held.clone());
                self.push(held);
            }
        }
        self.held = Some(event);
        out
    }

    /// Commit the held click once its window has closed at `now`.
    pub fn flush_held(&mut self, now: f64) -> Option<Event> {
        let due = self.held.as_ref().is_some_and(|h| now >= h.t + self.debounce_s);
        if due {
            self.force_flush()
        } else {
            None
        }
    }

    /// Commit the held click regardless of its window.
    pub fn force_flush(&mut self) -> Option<Event> {
        let held = self.held.take()?;
        self.push(held.clone());
        Some(held)
    }

    pub fn held(&self) -> Option<&Event> {
        self.held.as_ref()
    }

    /// Copy the oldest `max_records` pending records into a new outstanding
    /// batch. Nothing leaves `pending` here.
    pub fn open_batch(&mut self, max_records: usize) -> Option<(u64, Vec<Event>)> {
        if self.pending.is_empty() || max_records == 0 {
            return None;
        }
        let (keys, events): (Vec<RecordKey>, Vec<Event>) = self
            .pending
            .iter()
            .take(max_records)
            .map(|(k, e)| (*k, e.clone()))
            .unzip();
        let id = self.next_batch_id;
        self.next_batch_id += 1;
        self.outstanding.insert(id, keys);
        Some((id, events))
    }

    /// Move the records of `batch_id` from pending to synced.
    pub fn ack(&mut self, batch_id: u64, now: f64) -> AckOutcome {
        let Some(keys) = self.outstanding.remove(&batch_id) else {
            if self.acked.contains(&batch_id) {
                return AckOutcome::Repeated;
            }
            warn!("ack for unknown batch {batch_id} ignored");
            return AckOutcome::Unknown;
        };
        self.acked.insert(batch_id);
        let mut marked = 0;
        for key in keys {
            if let Some(event) = self.pending.remove(&key) {
                self.synced.push(SyncedRecord {
                    event,
                    acked_at: now,
                });
                marked += 1;
            }
        }
        AckOutcome::Marked(marked)
    }

    /// Drop synced records whose ack is older than the persistence limit.
    pub fn purge(&mut self, now: f64) -> usize {
        let limit = self.persistence_limit_h * 3600.0;
        let before = self.synced.len();
        self.synced.retain(|r| now - r.acked_at < limit);
        before - self.synced.len()
    }

    pub fn pending(&self) -> impl Iterator<Item = &Event> {
        self.pending.values()
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    pub fn synced(&self) -> &[SyncedRecord] {
        &self.synced
    }

    pub fn outstanding_batches(&self) -> usize {
        self.outstanding.len()
    }

    /// Uuids of every record ever written to the store, in write order.
    pub fn committed(&self) -> &[Uuid] {
        &self.committed
    }

    pub fn forgotten_count(&self) -> u64 {
        self.forgotten
    }

    pub fn superseded_count(&self) -> u64 {
        self.superseded
    }
}
