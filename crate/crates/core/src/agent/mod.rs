//! The on-device agent: duty-cycled sensing, report debounce, empathy score,
//! duplicate-forgetting store, sentiment heuristic, periodic self-repair and
//! crash revival, plus the client side of sync.
//!
//! An [`Agent`] is a state machine. The driver calls [`Agent::advance`] to
//! run internal timers up to a time, then hands it world observations with
//! [`Agent::observe`] and device faults with [`Agent::on_fault`].

mod empathy;
mod feed;
mod sentiment;
mod store;

use ed25519_dalek::{SigningKey, VerifyingKey};
use log::{debug, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use empathy::EmpathyState;
pub use feed::{FeedConfig, FeedTick};
pub use sentiment::{analyze_sentiment, fold_diacritics, lexicon_sizes, translate_stub, CLASS_THRESHOLD};
pub use store::{AckOutcome, ClickOutcome, DedupeOutcome, LocalStore, SyncedRecord};

use crate::error::{Error, Result};
use crate::simworld::{random_uuid, Activity, EntityId, Event, FaultKind, Payload, Point};
use crate::syncsec::{
    self, wire, KeyRegistry, MessageKind, SyncOutcome, SyncScheduler, Uplink, SERVER_ID,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub feed: FeedConfig,
    pub debounce_s: f64,
    pub empathy_half_life_h: f64,
    pub empathy_increment: f64,
    pub empathy_initial: f64,
    pub persistence_limit_h: f64,
    pub check_interval_min: f64,
    /// How long after a click or text the user counts as paying attention.
    pub interaction_s: f64,
    pub dedupe_cell_m: f64,
    pub sync_base_min: f64,
    pub sync_floor_min: f64,
    pub max_batch_records: usize,
    pub max_batches_per_sync: usize,
    /// Delay between a device reboot and the boot-completed event.
    pub reboot_delay_s: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            feed: FeedConfig::default(),
            debounce_s: 60.0,
            empathy_half_life_h: 48.0,
            empathy_increment: 5.0,
            empathy_initial: 50.0,
            persistence_limit_h: 72.0,
            check_interval_min: 15.0,
            interaction_s: 120.0,
            dedupe_cell_m: 50.0,
            sync_base_min: 15.0,
            sync_floor_min: 1.0,
            max_batch_records: 500,
            max_batches_per_sync: 20,
            reboot_delay_s: 90.0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        self.feed.validate()?;
        let positive = [
            ("debounce_s", self.debounce_s),
            ("empathy_half_life_h", self.empathy_half_life_h),
            ("persistence_limit_h", self.persistence_limit_h),
            ("check_interval_min", self.check_interval_min),
            ("dedupe_cell_m", self.dedupe_cell_m),
            ("sync_base_min", self.sync_base_min),
            ("sync_floor_min", self.sync_floor_min),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("agent.{name} must be > 0, got {v}")));
            }
        }
        if self.sync_floor_min > self.sync_base_min {
            return Err(Error::Config("agent.sync_floor_min exceeds sync_base_min".into()));
        }
        if self.max_batch_records == 0 || self.max_batches_per_sync == 0 {
            return Err(Error::Config("agent batch limits must be positive".into()));
        }
        Ok(())
    }

    pub fn check_interval_s(&self) -> f64 {
        self.check_interval_min * 60.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentState {
    Running,
    Crashed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentStatus {
    pub state: AgentState,
    pub feed_alive: bool,
    pub last_homeostasis: f64,
    pub check_interval_min: f64,
    pub user_interacting: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SystemEvent {
    Boot,
    Crash,
    ReviveTick,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairAction {
    RestartFeed,
    UpdateNotification,
    RunDbMaintenance,
}

/// One crash and the moment the agent was running again.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Recovery {
    pub crashed_at: f64,
    pub running_at: f64,
}

impl Recovery {
    pub fn delay_s(&self) -> f64 {
        self.running_at - self.crashed_at
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AgentCounters {
    pub active_seconds: f64,
    pub energy: f64,
    pub samples: u64,
    pub lost_while_crashed: u64,
    pub sync_attempts: u64,
    pub offline_attempts: u64,
    pub batches_sent: u64,
    pub bad_responses: u64,
}

pub struct Agent {
    entity_id: EntityId,
    config: AgentConfig,
    status: AgentStatus,
    store: LocalStore,
    empathy: EmpathyState,
    scheduler: SyncScheduler,
    rng: ChaCha8Rng,
    signing_key: SigningKey,
    server_key: VerifyingKey,
    now: f64,
    next_check: f64,
    next_sync: f64,
    pending_boot: Option<f64>,
    context: Option<(Activity, Point)>,
    last_interaction: f64,
    open_crash: Option<f64>,
    recoveries: Vec<Recovery>,
    repairs: Vec<(f64, RepairAction)>,
    nonce: u64,
    counters: AgentCounters,
}

impl Agent {
    /// A freshly installed, running agent at t = 0.
    pub fn new(
        entity_id: EntityId,
        config: AgentConfig,
        signing_key: SigningKey,
        server_key: VerifyingKey,
        seed: u64,
        stream: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let store = LocalStore::new(config.persistence_limit_h, config.debounce_s, config.dedupe_cell_m);
        let empathy = EmpathyState {
            score: config.empathy_initial,
            half_life_h: config.empathy_half_life_h,
            last_update: 0.0,
            increment_per_report: config.empathy_increment,
        };
        let scheduler = SyncScheduler::new(config.sync_base_min, config.sync_floor_min);
        let interval = config.check_interval_s();
        Agent {
            entity_id,
            status: AgentStatus {
                state: AgentState::Running,
                feed_alive: true,
                last_homeostasis: 0.0,
                check_interval_min: config.check_interval_min,
                user_interacting: false,
            },
            store,
            empathy,
            next_sync: config.sync_base_min * 60.0,
            scheduler,
            rng,
            signing_key,
            server_key,
            now: 0.0,
            next_check: interval,
            pending_boot: None,
            context: None,
            last_interaction: f64::NEG_INFINITY,
            open_crash: None,
            recoveries: Vec::new(),
            repairs: Vec::new(),
            nonce: 0,
            counters: AgentCounters::default(),
            config,
        }
    }

    pub fn entity_id(&self) -> &EntityId {
        &self.entity_id
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn status(&self) -> AgentStatus {
        let mut s = self.status;
        s.user_interacting = self.is_interacting(self.now);
        s
    }

    pub fn store(&self) -> &LocalStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut LocalStore {
        &mut self.store
    }

    pub fn empathy(&self) -> &EmpathyState {
        &self.empathy
    }

    pub fn scheduler(&self) -> &SyncScheduler {
        &self.scheduler
    }

    pub fn recoveries(&self) -> &[Recovery] {
        &self.recoveries
    }

    pub fn repairs(&self) -> &[(f64, RepairAction)] {
        &self.repairs
    }

    pub fn counters(&self) -> AgentCounters {
        self.counters
    }

    /// Fraction of the battery spent on sensing so far.
    pub fn battery_drain(&self) -> f64 {
        self.counters.energy / self.config.feed.battery_capacity
    }

    fn is_interacting(&self, now: f64) -> bool {
        now - self.last_interaction < self.config.interaction_s
    }

    fn running(&self) -> bool {
        self.status.state == AgentState::Running
    }

    /// Simulate the feed service over `[from, to)`: one reading per sample
    /// instant, forgetting consecutive duplicates.
    pub fn feed_tick(&mut self, from: f64, to: f64) -> FeedTick {
        if !self.running() || !self.status.feed_alive || to <= from {
            return FeedTick::default();
        }
        let cfg = &self.config.feed;
        let active_s = cfg.active_seconds(from, to);
        let energy = active_s * cfg.energy_per_active_second;
        let sample_times = cfg.sample_times(from, to);
        self.counters.active_seconds += active_s;
        self.counters.energy += energy;
        self.counters.samples += sample_times.len() as u64;
        if let Some((activity, location)) = self.context {
            for &t in &sample_times {
                let reading = Event {
                    uuid: random_uuid(&mut self.rng),
                    entity_id: self.entity_id.clone(),
                    t,
                    location: Some(location),
                    payload: Payload::Sensor { activity },
                };
                self.store.dedupe_store(reading);
            }
        }
        FeedTick {
            sample_times,
            active_s,
            energy,
        }
    }

    /// Make the feed service die without crashing the agent.
    pub fn stall_feed(&mut self) {
        self.status.feed_alive = false;
    }

    fn commit_bump(&mut self, committed: Option<Event>) {
        if committed.is_some() {
            self.empathy.update(self.now, 1);
        }
    }

    /// Feed one report click through the debounce slot at the agent's clock.
    pub fn ingest_report(&mut self, click: Event) -> ClickOutcome {
        self.last_interaction = click.t;
        let out = self.store.click(click);
        self.commit_bump(out.committed.clone());
        out
    }

    fn ingest_text(&mut self, mut event: Event) {
        self.last_interaction = event.t;
        if let Payload::Text { body, sentiment } = &mut event.payload {
            *sentiment = Some(analyze_sentiment(body));
        }
        self.store.push(event);
    }

    /// Hand the agent something that happened in the world at `event.t`.
    ///
    /// Sensor events update what the sensors would read. Reports and texts
    /// arriving while the agent is crashed are lost.
    pub fn observe(&mut self, event: Event) {
        debug_assert!(event.t >= self.now - 1e-9, "observe must not go back in time");
        match &event.payload {
            Payload::Sensor { activity } => {
                if let Some(p) = event.location {
                    self.context = Some((*activity, p));
                }
            }
            _ if !self.running() => self.counters.lost_while_crashed += 1,
            Payload::Report { .. } => {
                self.ingest_report(event);
            }
            Payload::Text { .. } => self.ingest_text(event),
        }
    }

    pub fn on_system_event(&mut self, event: SystemEvent, now: f64) -> AgentStatus {
        match event {
            SystemEvent::Crash => {
                if self.running() {
                    let held = self.store.force_flush();
                    self.commit_bump(held);
                    self.status.state = AgentState::Crashed;
                    self.status.feed_alive = false;
                    self.open_crash = Some(now);
                    debug!("{} crashed at {now}", self.entity_id);
                }
            }
            SystemEvent::Boot => self.start(now),
            SystemEvent::ReviveTick => {
                if !self.running() {
                    self.start(now);
                }
            }
        }
        self.status()
    }

    fn start(&mut self, now: f64) {
        self.status.state = AgentState::Running;
        self.status.feed_alive = true;
        if let Some(crashed_at) = self.open_crash.take() {
            self.recoveries.push(Recovery {
                crashed_at,
                running_at: now,
            });
        }
    }

    /// Apply a device-level fault at the agent's current time. Network
    /// faults are ignored here; the transport handles them.
    pub fn on_fault(&mut self, kind: FaultKind) {
        let now = self.now;
        match kind {
            FaultKind::Crash => {
                self.on_system_event(SystemEvent::Crash, now);
            }
            FaultKind::Reboot => {
                self.on_system_event(SystemEvent::Crash, now);
                self.pending_boot = Some(now + self.config.reboot_delay_s);
            }
            _ => {}
        }
    }

    /// Periodic self-check. Does nothing unless running and due.
    pub fn homeostasis_check(&mut self, now: f64) -> Vec<RepairAction> {
        if !self.running() || now - self.status.last_homeostasis < self.config.check_interval_s() - 1e-9 {
            return Vec::new();
        }
        self.status.last_homeostasis = now;
        let actions = if !self.status.feed_alive {
            self.status.feed_alive = true;
            vec![RepairAction::RestartFeed]
        } else if self.is_interacting(now) {
            self.empathy.update(now, 0);
            vec![RepairAction::UpdateNotification]
        } else {
            self.store.purge(now);
            vec![RepairAction::RunDbMaintenance]
        };
        self.repairs.extend(actions.iter().map(|a| (now, *a)));
        actions
    }

    fn held_due(&self) -> f64 {
        self.store
            .held()
            .map_or(f64::INFINITY, |h| h.t + self.config.debounce_s)
    }

    /// Run every internal timer due strictly before `until`, sensing in
    /// between, then set the clock to `until`.
    pub fn advance(&mut self, until: f64, link: &mut dyn Uplink) {
        while self.now < until {
            let boot = self.pending_boot.unwrap_or(f64::INFINITY);
            let next = self.next_check.min(self.next_sync).min(self.held_due()).min(boot);
            let stop = next.min(until);
            self.feed_tick(self.now, stop);
            self.now = stop;
            if next >= until {
                break;
            }
            if boot <= next {
                self.pending_boot = None;
                self.on_system_event(SystemEvent::Boot, next);
            } else if self.held_due() <= next {
                let held = self.store.flush_held(next);
                self.commit_bump(held);
            } else if self.next_check <= next {
                self.next_check += self.config.check_interval_s();
                if self.running() {
                    self.homeostasis_check(next);
                } else {
                    self.on_system_event(SystemEvent::ReviveTick, next);
                }
            } else {
                let minutes = if self.running() {
                    self.sync_once(link)
                } else {
                    self.scheduler.current_interval_min
                };
                self.next_sync = next + minutes * 60.0;
            }
        }
    }

    /// One sync attempt: push batches while acks keep coming back.
    /// Returns the minutes until the next attempt.
    pub fn sync_once(&mut self, link: &mut dyn Uplink) -> f64 {
        self.counters.sync_attempts += 1;
        if !link.is_connected(&self.entity_id) {
            self.counters.offline_attempts += 1;
            return self.scheduler.next_sync_interval(SyncOutcome::NoConnectivity);
        }
        for _ in 0..self.config.max_batches_per_sync {
            let Some(batch) =
                syncsec::make_batch(&mut self.store, &self.entity_id, self.config.max_batch_records, self.now)
            else {
                break;
            };
            self.nonce += 1;
            let frame = wire::seal(
                &self.signing_key,
                &self.entity_id,
                MessageKind::Batch,
                batch.batch_id,
                self.nonce,
                &batch,
            );
            self.counters.batches_sent += 1;
            let mut acked = false;
            for response in link.exchange(&self.entity_id, &frame) {
                match self.read_ack(&response) {
                    Ok(ack) => {
                        syncsec::handle_ack(&mut self.store, ack.batch_id, self.now);
                        acked |= ack.batch_id == batch.batch_id;
                    }
                    Err(e) => {
                        self.counters.bad_responses += 1;
                        warn!("{}: unusable sync response: {e}", self.entity_id);
                    }
                }
            }
            if !acked {
                break;
            }
        }
        self.scheduler.next_sync_interval(SyncOutcome::Ok)
    }

    fn read_ack(&self, frame: &[u8]) -> Result<wire::Ack> {
        let env = wire::decode(frame)?;
        let mut servers = KeyRegistry::new();
        servers.insert(EntityId::from(SERVER_ID), self.server_key);
        syncsec::verify_and_scope(&env, &servers)?;
        let ack: wire::Ack = wire::open(&env, MessageKind::Ack)?;
        if ack.entity_id != self.entity_id {
            return Err(crate::error::AuthError::Scope.into());
        }
        Ok(ack)
    }

    /// Bring the agent to quiescence at its current time: commit any held
    /// click, restart if crashed, and sync until nothing is pending or no
    /// progress is made.
    pub fn settle(&mut self, link: &mut dyn Uplink) {
        let now = self.now;
        let held = self.store.force_flush();
        self.commit_bump(held);
        if !self.running() {
            self.on_system_event(SystemEvent::ReviveTick, now);
        }
        self.pending_boot = None;
        loop {
            let before = self.store.pending_len();
            if before == 0 {
                break;
            }
            self.sync_once(link);
            if self.store.pending_len() >= before {
                break;
            }
        }
    }

    /// Every record this agent still holds, pending then synced.
    pub fn export_log(&self) -> Vec<Event> {
        let mut out: Vec<Event> = self.store.pending().cloned().collect();
        out.extend(self.store.synced().iter().map(|r| r.event.clone()));
        out.sort_by(|a, b| a.t.total_cmp(&b.t));
        out
    }
}
