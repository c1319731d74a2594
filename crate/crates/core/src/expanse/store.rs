//! Cloud memory: one time-ordered log per entity, deduplicated by record uuid.

use std::collections::{BTreeMap, HashSet};
use std::sync::{Arc, Mutex, RwLock};

use uuid::Uuid;

use crate::error::{AuthError, Error, Result};
use crate::simworld::{EntityId, Event};
use crate::syncsec::SyncBatch;

#[derive(Default)]
struct EntityLog {
    events: Vec<Event>,
    seen: HashSet<Uuid>,
    has_demographics: bool,
}

/// Safe for concurrent ingestion from many entities: the map lock is held
/// only to find or create a log, and each log has its own lock.
#[derive(Default)]
pub struct MemoryStore {
    logs: RwLock<BTreeMap<EntityId, Arc<Mutex<EntityLog>>>>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    fn log(&self, id: &EntityId) -> Arc<Mutex<EntityLog>> {
        if let Some(log) = self.logs.read().expect("store lock").get(id) {
            return Arc::clone(log);
        }
        let mut logs = self.logs.write().expect("store lock");
        Arc::clone(logs.entry(id.clone()).or_default())
    }

    /// Record what the entity shared at enrolment.
    pub fn register(&self, id: &EntityId, has_demographics: bool) {
        self.log(id).lock().expect("log lock").has_demographics = has_demographics;
    }

    /// Insert the unseen records of a batch already verified as coming from `signer`.
    pub fn ingest(&self, signer: &EntityId, batch: &SyncBatch) -> Result<usize> {
        if &batch.entity_id != signer || batch.records.iter().any(|r| &r.entity_id != signer) {
            return Err(AuthError::Scope.into());
        }
        let log = self.log(signer);
        let mut log = log.lock().expect("log lock");
        let mut inserted = 0;
        for record in &batch.records {
            if !log.seen.insert(record.uuid) {
                continue;
            }
            let at = log
                .events
                .partition_point(|e| (e.t, e.uuid) <= (record.t, record.uuid));
            log.events.insert(at, record.clone());
            inserted += 1;
        }
        Ok(inserted)
    }

    /// Reload records exported earlier, skipping uuids already present.
    pub fn restore(&self, id: &EntityId, events: impl IntoIterator<Item = Event>) -> Result<usize> {
        let log = self.log(id);
        let mut log = log.lock().expect("log lock");
        let mut inserted = 0;
        for record in events {
            if &record.entity_id != id {
                return Err(Error::Contract(format!("record of {} in the log of {id}", record.entity_id)));
            }
            if log.seen.insert(record.uuid) {
                log.events.push(record);
                inserted += 1;
            }
        }
        log.events.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.uuid.cmp(&b.uuid)));
        Ok(inserted)
    }

    pub fn contains(&self, id: &EntityId) -> bool {
        self.logs.read().expect("store lock").contains_key(id)
    }

    pub fn entities(&self) -> Vec<EntityId> {
        self.logs.read().expect("store lock").keys().cloned().collect()
    }

    /// Snapshot of an entity's log, time-ordered. `None` if never seen.
    pub fn export(&self, id: &EntityId) -> Option<Vec<Event>> {
        let log = Arc::clone(self.logs.read().expect("store lock").get(id)?);
        let events = log.lock().expect("log lock").events.clone();
        Some(events)
    }

    pub fn has_demographics(&self, id: &EntityId) -> Option<bool> {
        let log = Arc::clone(self.logs.read().expect("store lock").get(id)?);
        let flag = log.lock().expect("log lock").has_demographics;
        Some(flag)
    }

    pub fn len(&self, id: &EntityId) -> usize {
        self.logs
            .read()
            .expect("store lock")
            .get(id)
            .map_or(0, |l| l.lock().expect("log lock").events.len())
    }

    pub fn total_records(&self) -> usize {
        self.logs
            .read()
            .expect("store lock")
            .values()
            .map(|l| l.lock().expect("log lock").events.len())
            .sum()
    }
}
