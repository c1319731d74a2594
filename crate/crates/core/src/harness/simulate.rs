use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use log::info;
use uuid::Uuid;

use crate::agent::{Agent, AgentConfig, AgentCounters, Recovery};
use crate::error::{Error, Result};
use crate::expanse::CloudServer;
use crate::learn::derive_seed;
use crate::simworld::{Cohort, EntityId, FaultPlan, World};
use crate::syncsec::{derive_signing_key, FaultyTransport, KeyRegistry, TransportStats};

/// Where each record an agent committed ended up on the server.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DeliveryAudit {
    /// Records the agent committed locally.
    pub committed: usize,
    /// Records the server holds for the entity.
    pub stored: usize,
    /// Committed but absent from the server.
    pub missing: usize,
    /// On the server but never committed by the agent.
    pub unexpected: usize,
    /// Uuids that appear more than once in the server log.
    pub duplicated: usize,
}

impl DeliveryAudit {
    pub fn exactly_once(&self) -> bool {
        self.missing == 0 && self.unexpected == 0 && self.duplicated == 0
    }
}

#[derive(Clone, Debug)]
pub struct AgentReport {
    pub entity_id: EntityId,
    pub recoveries: Vec<Recovery>,
    pub counters: AgentCounters,
    pub battery_drain: f64,
    pub audit: DeliveryAudit,
}

impl AgentReport {
    pub fn max_recovery_s(&self) -> Option<f64> {
        self.recoveries.iter().map(Recovery::delay_s).reduce(f64::max)
    }
}

/// The state of the world after every agent has settled with the server.
pub struct Simulation {
    pub cohort: Cohort,
    pub plan: FaultPlan,
    pub server: Arc<CloudServer>,
    pub agents: Vec<AgentReport>,
    pub transport: TransportStats,
}

impl Simulation {
    pub fn exactly_once(&self) -> bool {
        self.agents.iter().all(|a| a.audit.exactly_once())
    }

    pub fn crashes(&self) -> usize {
        self.agents.iter().map(|a| a.recoveries.len()).sum()
    }
}

enum Item<'a> {
    Event(crate::simworld::Event),
    Fault(&'a crate::simworld::FaultEntry),
}

/// Drive every agent through the cohort's horizon under `plan`, syncing to
/// one in-process server through a fault-injecting transport.
pub fn simulate(cohort: Cohort, plan: FaultPlan, agent_config: &AgentConfig, step_s: f64, seed: u64) -> Result<Simulation> {
    if !(step_s > 0.0) {
        return Err(Error::Config(format!("step_s must be > 0, got {step_s}")));
    }
    let ids: Vec<EntityId> = cohort.profiles.iter().map(|p| p.entity_id.clone()).collect();
    let index: HashMap<EntityId, usize> = ids.iter().cloned().enumerate().map(|(i, id)| (id, i)).collect();
    if let Some(f) = plan.entries().iter().find(|f| !index.contains_key(&f.entity)) {
        return Err(Error::Config(format!("fault plan names unknown entity {}", f.entity)));
    }

    let server = Arc::new(CloudServer::with_seed(KeyRegistry::enroll_all(seed, &ids), seed));
    for p in &cohort.profiles {
        server.store.register(&p.entity_id, p.has_demographics());
    }
    let server_key = server.verifying_key();
    let agent_seed = derive_seed(seed, 3);
    let mut agents: Vec<Agent> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            Agent::new(
                id.clone(),
                agent_config.clone(),
                derive_signing_key(seed, id.as_str()),
                server_key,
                agent_seed,
                i as u64,
            )
        })
        .collect();
    let mut transport = FaultyTransport::new(Arc::clone(&server));

    let horizon = cohort.spec.horizon_s();
    let mut world = World::new(cohort.clone(), plan.clone(), seed);
    let mut now = 0.0;
    while now < horizon {
        let dt = step_s.min(horizon - now);
        let out = world.step(dt);
        now += dt;
        let mut items: Vec<(f64, Item)> = Vec::with_capacity(out.events.len() + out.faults.len());
        items.extend(out.events.into_iter().map(|e| (e.t, Item::Event(e))));
        let faults = out.faults;
        items.extend(faults.iter().map(|f| (f.t, Item::Fault(f))));
        // stable: at equal times events keep their order and precede faults
        items.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (t, item) in items {
            match item {
                Item::Event(e) => {
                    let agent = &mut agents[index[&e.entity_id]];
                    agent.advance(t, &mut transport);
                    agent.observe(e);
                }
                Item::Fault(f) => {
                    let agent = &mut agents[index[&f.entity]];
                    agent.advance(t, &mut transport);
                    if !transport.apply_fault(f) {
                        agent.on_fault(f.kind);
                    }
                }
            }
        }
        for agent in agents.iter_mut() {
            agent.advance(now, &mut transport);
        }
    }
    transport.heal();
    for agent in agents.iter_mut() {
        agent.settle(&mut transport);
    }
    info!(
        "simulated {} entities over {:.1} days, {} records stored",
        agents.len(),
        horizon / 86_400.0,
        server.store.total_records()
    );

    let reports = agents
        .iter()
        .map(|a| AgentReport {
            entity_id: a.entity_id().clone(),
            recoveries: a.recoveries().to_vec(),
            counters: a.counters(),
            battery_drain: a.battery_drain(),
            audit: audit(a.store().committed(), &server.store.export(a.entity_id()).unwrap_or_default()),
        })
        .collect();
    let transport = transport.stats();
    Ok(Simulation {
        cohort,
        plan,
        server,
        agents: reports,
        transport,
    })
}

fn audit(committed: &[Uuid], stored: &[crate::simworld::Event]) -> DeliveryAudit {
    let sent: HashSet<Uuid> = committed.iter().copied().collect();
    let mut seen = HashSet::new();
    let mut duplicated = 0;
    for e in stored {
        if !seen.insert(e.uuid) {
            duplicated += 1;
        }
    }
    DeliveryAudit {
        committed: sent.len(),
        stored: stored.len(),
        missing: sent.difference(&seen).count(),
        unexpected: seen.difference(&sent).count(),
        duplicated,
    }
}
