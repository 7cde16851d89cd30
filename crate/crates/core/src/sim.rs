//! Discrete-event loop tying the ledger, the storage cluster and the oracle
//! nodes together on one virtual clock.
//!
//! Each step jumps to the earliest of the next block slot and the next
//! storage delivery. Storage deliveries at time `t` are handled before the
//! block at `t`, so a node that finishes an upload at `t` lands its answer
//! in that block. Events from a block are handed to the nodes, whose calls
//! are submitted at the block time and land in the following block. A
//! keeper account expires oracle requests once their deadline passes.

use std::collections::BTreeSet;

use ed25519_dalek::SigningKey;
use thiserror::Error;

use crate::ledger::{AccountId, Block, EventRecord, Ledger, LedgerError, Receipt, TxHash, DEFAULT_BLOCK_INTERVAL_MS};
use crate::oracle::{FaultMode, NodeConfig, OracleCall, OracleContract, OracleNode, RequestId, DEFAULT_DEADLINE_MS};
use crate::platform::{Platform, PlatformCall};
use crate::sealing::{account_of, keypair_from_seed};
use crate::storage::{Cluster, NetworkModel};
use crate::token::TokenCall;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("condition not met by virtual time {0} ms")]
    Timeout(u64),
    #[error("transaction failed: {0}")]
    TxFailed(String),
    #[error("setup failed: {0}")]
    Setup(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimConfig {
    pub block_interval_ms: u64,
    pub net: NetworkModel,
    /// One entry per oracle node; node `i` runs on storage node `i`.
    pub node_faults: Vec<FaultMode>,
    pub oracle_deadline_ms: u64,
    /// Minted to the admin, who deploys the token.
    pub initial_supply: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            block_interval_ms: DEFAULT_BLOCK_INTERVAL_MS,
            net: NetworkModel::default(),
            node_faults: vec![FaultMode::Honest; 3],
            oracle_deadline_ms: DEFAULT_DEADLINE_MS,
            initial_supply: 1_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Actor {
    pub id: AccountId,
    pub key: SigningKey,
}

pub struct Simulation {
    ledger: Ledger<Platform>,
    storage: Cluster,
    nodes: Vec<OracleNode>,
    admin: Actor,
    keeper: Actor,
    blocks_seen: usize,
    expiring: BTreeSet<RequestId>,
}

impl Simulation {
    /// Deploys the contracts and registers the oracle nodes; returns once
    /// the setup block is in.
    pub fn new(config: &SimConfig) -> Result<Self, SimError> {
        if config.node_faults.is_empty() {
            return Err(SimError::Setup("at least one oracle node is required".into()));
        }
        let admin_key = keypair_from_seed(b"helene/admin");
        let admin_id = account_of(&admin_key.verifying_key());
        let keeper_key = keypair_from_seed(b"helene/keeper");
        let platform = Platform::new(OracleContract::new(admin_id, config.oracle_deadline_ms));
        let mut sim = Simulation {
            ledger: Ledger::with_interval(platform, config.block_interval_ms),
            storage: Cluster::new(config.node_faults.len(), config.net),
            nodes: Vec::new(),
            admin: Actor {
                id: admin_id,
                key: admin_key,
            },
            keeper: Actor {
                id: account_of(&keeper_key.verifying_key()),
                key: keeper_key,
            },
            blocks_seen: 0,
            expiring: BTreeSet::new(),
        };
        sim.register(&sim.admin.clone())?;
        sim.register(&sim.keeper.clone())?;
        let mut setup = vec![sim.submit(
            admin_id,
            TokenCall::Initialize {
                initial_supply: config.initial_supply,
            },
        )?];
        for (i, fault) in config.node_faults.iter().enumerate() {
            let node = sim.actor(&format!("helene/oracle-node-{i}"))?;
            let cfg = NodeConfig {
                id: i as u32,
                account: node.id,
                storage_node: i,
                fault_mode: *fault,
            };
            setup.push(sim.submit(admin_id, OracleCall::RegisterNode(cfg))?);
            sim.nodes.push(OracleNode::new(cfg));
        }
        for h in setup {
            let r = sim.wait_receipt(&h, 10 * config.block_interval_ms)?;
            if let Err(e) = r.status {
                return Err(SimError::Setup(e));
            }
        }
        Ok(sim)
    }

    fn register(&mut self, actor: &Actor) -> Result<(), SimError> {
        self.ledger.create_account(actor.key.verifying_key().as_bytes())?;
        Ok(())
    }

    /// Deterministic account derived from `label`, registered on the ledger.
    pub fn actor(&mut self, label: &str) -> Result<Actor, SimError> {
        let key = keypair_from_seed(label.as_bytes());
        let actor = Actor {
            id: account_of(&key.verifying_key()),
            key,
        };
        self.register(&actor)?;
        Ok(actor)
    }

    pub fn admin(&self) -> &Actor {
        &self.admin
    }

    pub fn now(&self) -> u64 {
        self.ledger.now()
    }

    pub fn ledger(&self) -> &Ledger<Platform> {
        &self.ledger
    }

    pub fn platform(&self) -> &Platform {
        self.ledger.runtime()
    }

    pub fn storage(&self) -> &Cluster {
        &self.storage
    }

    pub fn nodes(&self) -> &[OracleNode] {
        &self.nodes
    }

    pub fn submit(&mut self, sender: AccountId, call: impl Into<PlatformCall>) -> Result<TxHash, SimError> {
        let (target, op, args) = call.into().encode();
        Ok(self.ledger.submit(sender, target, op, args)?)
    }

    pub fn receipt(&self, hash: &TxHash) -> Option<&Receipt> {
        self.ledger.receipt(hash)
    }

    /// Processes everything up to the next point of interest and returns
    /// its time.
    pub fn step(&mut self) -> Result<u64, SimError> {
        let mut t = self.ledger.next_block_time();
        if let Some(d) = self.storage.next_delivery() {
            t = t.min(d);
        }
        let t = t.max(self.ledger.now());

        let done = self.storage.advance_to(t).expect("t is not in the past");
        for c in &done {
            for i in 0..self.nodes.len() {
                if let Some(call) = self.nodes[i].on_completion(c, &mut self.storage) {
                    let account = self.nodes[i].account();
                    self.submit_at(account, call.into(), t)?;
                }
            }
        }

        self.ledger.advance_to(t)?;
        let events: Vec<EventRecord> = self.ledger.blocks()[self.blocks_seen..]
            .iter()
            .flat_map(|b: &Block| b.events.iter().cloned())
            .collect();
        self.blocks_seen = self.ledger.blocks().len();
        for ev in &events {
            for i in 0..self.nodes.len() {
                let calls = self.nodes[i].on_event(ev, &self.ledger.runtime().oracle, &mut self.storage);
                let account = self.nodes[i].account();
                for call in calls {
                    self.submit_at(account, call.into(), t)?;
                }
            }
        }

        for id in self.ledger.runtime().oracle.overdue(t) {
            if self.expiring.insert(id) {
                let keeper = self.keeper.id;
                self.submit_at(keeper, OracleCall::ExpireRequest { request_id: id }.into(), t)?;
            }
        }
        Ok(t)
    }

    fn submit_at(&mut self, sender: AccountId, call: PlatformCall, t: u64) -> Result<TxHash, SimError> {
        let (target, op, args) = call.encode();
        Ok(self.ledger.submit_at(sender, target, op, args, t)?)
    }

    /// Steps until `done` holds, failing once virtual time would pass
    /// `now + max_ms`.
    pub fn run_until(&mut self, max_ms: u64, mut done: impl FnMut(&Simulation) -> bool) -> Result<u64, SimError> {
        let limit = self.now() + max_ms;
        while !done(self) {
            if self.ledger.next_block_time() > limit && self.storage.next_delivery().is_none_or(|d| d > limit) {
                return Err(SimError::Timeout(limit));
            }
            self.step()?;
        }
        Ok(self.now())
    }

    pub fn wait_receipt(&mut self, hash: &TxHash, max_ms: u64) -> Result<Receipt, SimError> {
        self.run_until(max_ms, |s| s.receipt(hash).is_some())?;
        Ok(self.receipt(hash).expect("just checked").clone())
    }

    /// Submits and waits for inclusion; a failed call becomes an error.
    pub fn transact(&mut self, sender: AccountId, call: impl Into<PlatformCall>, max_ms: u64) -> Result<Receipt, SimError> {
        let h = self.submit(sender, call)?;
        let r = self.wait_receipt(&h, max_ms)?;
        match &r.status {
            Ok(_) => Ok(r),
            Err(e) => Err(SimError::TxFailed(e.clone())),
        }
    }

    /// Runs whole blocks for at least `ms`.
    pub fn run_for(&mut self, ms: u64) -> Result<(), SimError> {
        let until = self.now() + ms;
        while self.ledger.next_block_time() <= until || self.storage.next_delivery().is_some_and(|d| d <= until) {
            self.step()?;
        }
        self.ledger.advance_to(until)?;
        Ok(())
    }
}
