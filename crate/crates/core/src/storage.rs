//! Simulated content-addressed store with full replication over a
//! deterministic network.
//!
//! The network is one shared FIFO medium: a message occupies it for
//! `ceil(size / bandwidth)` ms once the medium is free, then arrives
//! `latency` ms later. With an idle medium that gives
//! `delivery_time(size) = latency + ceil(size / bandwidth)`.
//!
//! Replication is a push: when a node stores new content it sends a copy to
//! every peer that does not store it yet, even if another copy is already
//! travelling there. Arriving replicas never trigger further pushes.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ContentId(String);

impl ContentId {
    pub const PREFIX: &'static str = "cid:";

    pub fn of(content: &[u8]) -> Self {
        ContentId(format!("{}{}", Self::PREFIX, hex::encode(Sha256::digest(content))))
    }

    /// Accepts only `cid:` followed by 64 lowercase hex digits.
    pub fn parse(s: &str) -> Result<Self, StorageError> {
        let hex_part = s
            .strip_prefix(Self::PREFIX)
            .ok_or_else(|| StorageError::MalformedCid(s.to_string()))?;
        if hex_part.len() != 64 || !hex_part.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
            return Err(StorageError::MalformedCid(s.to_string()));
        }
        Ok(ContentId(s.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn verifies(&self, content: &[u8]) -> bool {
        *self == Self::of(content)
    }
}

impl fmt::Display for ContentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for ContentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ContentId({})", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StorageError {
    #[error("content is empty")]
    EmptyContent,
    #[error("no node {0}")]
    UnknownNode(usize),
    #[error("{0} is not stored anywhere in the network")]
    UnknownCid(ContentId),
    #[error("malformed content id {0:?}")]
    MalformedCid(String),
    #[error("time {0} is before the current clock")]
    ClockRegression(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkModel {
    pub latency_ms: u64,
    pub bandwidth_bytes_per_ms: u64,
}

impl Default for NetworkModel {
    fn default() -> Self {
        NetworkModel {
            latency_ms: 25,
            bandwidth_bytes_per_ms: 8,
        }
    }
}

impl NetworkModel {
    pub fn new(latency_ms: u64, bandwidth_bytes_per_ms: u64) -> Self {
        assert!(bandwidth_bytes_per_ms > 0, "bandwidth must be positive");
        NetworkModel {
            latency_ms,
            bandwidth_bytes_per_ms,
        }
    }

    /// Time the medium is busy with a message of `size` bytes.
    pub fn transmit_time(&self, size: usize) -> u64 {
        (size as u64).div_ceil(self.bandwidth_bytes_per_ms)
    }

    pub fn delivery_time(&self, size: usize) -> u64 {
        self.latency_ms + self.transmit_time(size)
    }
}

#[derive(Debug, Clone, Default)]
pub struct StorageNode {
    store: BTreeMap<ContentId, Arc<[u8]>>,
}

impl StorageNode {
    pub fn store(&self) -> &BTreeMap<ContentId, Arc<[u8]>> {
        &self.store
    }
}

pub type TicketId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Purpose {
    /// Client upload into a node; the node stores and replicates on arrival.
    Upload,
    Replicate,
    /// Remote read for `cat`; nothing is stored at the reader.
    Fetch,
    /// Anti-entropy pull scheduled by `sync`.
    Sync,
}

#[derive(Debug, Clone)]
struct Message {
    to: usize,
    cid: ContentId,
    data: Arc<[u8]>,
    purpose: Purpose,
    ticket: Option<TicketId>,
}

#[derive(Debug, Clone)]
struct Ticket {
    outstanding: usize,
    started_at: u64,
    cid: ContentId,
    fetched: Option<Arc<[u8]>>,
}

/// A ticket whose last message was delivered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub ticket: TicketId,
    pub cid: ContentId,
    pub started_at: u64,
    pub completed_at: u64,
}

/// Outcome of `add`/`upload`: the content id and a ticket that completes
/// once the upload and every replica it caused have been delivered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AddReceipt {
    pub cid: ContentId,
    pub ticket: TicketId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CatResult {
    Local(Arc<[u8]>),
    /// Remote fetch in flight; bytes become available when the ticket completes.
    Pending(TicketId),
}

#[derive(Debug, Clone)]
pub struct Cluster {
    net: NetworkModel,
    nodes: Vec<StorageNode>,
    now: u64,
    medium_free_at: u64,
    in_flight: BTreeMap<(u64, u64), Message>,
    seq: u64,
    tickets: BTreeMap<TicketId, Ticket>,
    finished: BTreeMap<TicketId, Completion>,
    next_ticket: TicketId,
    auto_replicate: bool,
}

impl Cluster {
    pub fn new(nodes: usize, net: NetworkModel) -> Self {
        assert!(nodes > 0, "cluster needs at least one node");
        Cluster {
            net,
            nodes: vec![StorageNode::default(); nodes],
            now: 0,
            medium_free_at: 0,
            in_flight: BTreeMap::new(),
            seq: 0,
            tickets: BTreeMap::new(),
            finished: BTreeMap::new(),
            next_ticket: 0,
            auto_replicate: true,
        }
    }

    /// Disables push replication; content then spreads only through `sync`.
    pub fn manual_replication(mut self) -> Self {
        self.auto_replicate = false;
        self
    }

    pub fn network(&self) -> NetworkModel {
        self.net
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, id: usize) -> Result<&StorageNode, StorageError> {
        self.nodes.get(id).ok_or(StorageError::UnknownNode(id))
    }

    fn check_node(&self, id: usize) -> Result<(), StorageError> {
        self.node(id).map(|_| ())
    }

    pub fn has(&self, node: usize, cid: &ContentId) -> bool {
        self.nodes.get(node).is_some_and(|n| n.store.contains_key(cid))
    }

    fn in_flight_to(&self, node: usize, cid: &ContentId) -> bool {
        self.in_flight
            .values()
            .any(|m| m.to == node && &m.cid == cid && matches!(m.purpose, Purpose::Replicate | Purpose::Sync))
    }

    fn new_ticket(&mut self, cid: &ContentId) -> TicketId {
        let id = self.next_ticket;
        self.next_ticket += 1;
        self.tickets.insert(
            id,
            Ticket {
                outstanding: 0,
                started_at: self.now,
                cid: cid.clone(),
                fetched: None,
            },
        );
        id
    }

    fn send(&mut self, to: usize, cid: ContentId, data: Arc<[u8]>, purpose: Purpose, ticket: Option<TicketId>) {
        let start = self.medium_free_at.max(self.now);
        let busy_until = start + self.net.transmit_time(data.len());
        self.medium_free_at = busy_until;
        let deliver_at = busy_until + self.net.latency_ms;
        if let Some(t) = ticket {
            self.tickets.get_mut(&t).expect("live ticket").outstanding += 1;
        }
        self.in_flight.insert(
            (deliver_at, self.seq),
            Message {
                to,
                cid,
                data,
                purpose,
                ticket,
            },
        );
        self.seq += 1;
    }

    /// Stores at `node` and pushes replicas. Returns true if it was new.
    fn store_and_replicate(&mut self, node: usize, cid: &ContentId, data: &Arc<[u8]>, ticket: Option<TicketId>) -> bool {
        if self.nodes[node].store.contains_key(cid) {
            return false;
        }
        self.nodes[node].store.insert(cid.clone(), data.clone());
        if self.auto_replicate {
            for peer in 0..self.nodes.len() {
                if peer != node && !self.has(peer, cid) {
                    self.send(peer, cid.clone(), data.clone(), Purpose::Replicate, ticket);
                }
            }
        }
        true
    }

    /// Stores content on `node` now and schedules replication to its peers.
    pub fn add(&mut self, node: usize, content: &[u8]) -> Result<AddReceipt, StorageError> {
        self.check_node(node)?;
        if content.is_empty() {
            return Err(StorageError::EmptyContent);
        }
        let cid = ContentId::of(content);
        let ticket = self.new_ticket(&cid);
        let data: Arc<[u8]> = Arc::from(content);
        self.store_and_replicate(node, &cid, &data, Some(ticket));
        self.settle(ticket);
        Ok(AddReceipt { cid, ticket })
    }

    /// Sends content from an external client to `node` over the medium; the
    /// node stores and replicates when it arrives.
    pub fn upload(&mut self, node: usize, content: &[u8]) -> Result<AddReceipt, StorageError> {
        self.check_node(node)?;
        if content.is_empty() {
            return Err(StorageError::EmptyContent);
        }
        let cid = ContentId::of(content);
        let ticket = self.new_ticket(&cid);
        self.send(node, cid.clone(), Arc::from(content), Purpose::Upload, Some(ticket));
        Ok(AddReceipt { cid, ticket })
    }

    /// Reads `cid` at `node`: local hit, or a fetch from the lowest-numbered
    /// peer holding it.
    pub fn cat(&mut self, node: usize, cid: &ContentId) -> Result<CatResult, StorageError> {
        self.check_node(node)?;
        if let Some(d) = self.nodes[node].store.get(cid) {
            return Ok(CatResult::Local(d.clone()));
        }
        let data = self
            .nodes
            .iter()
            .find_map(|n| n.store.get(cid).cloned())
            .ok_or_else(|| StorageError::UnknownCid(cid.clone()))?;
        let ticket = self.new_ticket(cid);
        self.send(node, cid.clone(), data, Purpose::Fetch, Some(ticket));
        Ok(CatResult::Pending(ticket))
    }

    /// Bytes delivered by a completed fetch ticket.
    pub fn fetched(&self, ticket: TicketId) -> Option<Arc<[u8]>> {
        self.tickets.get(&ticket).and_then(|t| t.fetched.clone())
    }

    /// Schedules a transfer to `node` for every item some peer stores and
    /// `node` lacks. Returns how many transfers were scheduled.
    pub fn sync(&mut self, node: usize) -> Result<usize, StorageError> {
        self.check_node(node)?;
        let mut missing: BTreeMap<ContentId, Arc<[u8]>> = BTreeMap::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if i == node {
                continue;
            }
            for (cid, d) in &n.store {
                if !self.nodes[node].store.contains_key(cid) {
                    missing.entry(cid.clone()).or_insert_with(|| d.clone());
                }
            }
        }
        let mut count = 0;
        for (cid, data) in missing {
            if !self.in_flight_to(node, &cid) {
                self.send(node, cid, data, Purpose::Sync, None);
                count += 1;
            }
        }
        Ok(count)
    }

    pub fn next_delivery(&self) -> Option<u64> {
        self.in_flight.keys().next().map(|&(t, _)| t)
    }

    pub fn is_quiet(&self) -> bool {
        self.in_flight.is_empty()
    }

    fn settle(&mut self, ticket: TicketId) {
        let t = &self.tickets[&ticket];
        if t.outstanding == 0 && !self.finished.contains_key(&ticket) {
            self.finished.insert(
                ticket,
                Completion {
                    ticket,
                    cid: t.cid.clone(),
                    started_at: t.started_at,
                    completed_at: self.now,
                },
            );
        }
    }

    /// Delivers every message due at or before `t` in delivery order and
    /// returns the tickets that completed, including ones already complete
    /// from earlier local adds.
    pub fn advance_to(&mut self, t: u64) -> Result<Vec<Completion>, StorageError> {
        if t < self.now {
            return Err(StorageError::ClockRegression(t));
        }
        while let Some(entry) = self.in_flight.first_entry() {
            if entry.key().0 > t {
                break;
            }
            let ((at, _), msg) = entry.remove_entry();
            self.now = at;
            match msg.purpose {
                Purpose::Fetch => {
                    if let Some(tk) = msg.ticket {
                        self.tickets.get_mut(&tk).expect("live ticket").fetched = Some(msg.data.clone());
                    }
                }
                Purpose::Upload => {
                    self.store_and_replicate(msg.to, &msg.cid, &msg.data, msg.ticket);
                }
                Purpose::Replicate | Purpose::Sync => {
                    self.nodes[msg.to].store.entry(msg.cid.clone()).or_insert(msg.data.clone());
                }
            }
            if let Some(tk) = msg.ticket {
                self.tickets.get_mut(&tk).expect("live ticket").outstanding -= 1;
                self.settle(tk);
            }
        }
        self.now = t;
        Ok(std::mem::take(&mut self.finished).into_values().collect())
    }

    /// Delivers everything in flight; returns the time of the last delivery.
    pub fn quiesce(&mut self) -> (u64, Vec<Completion>) {
        let end = self.in_flight.keys().last().map_or(self.now, |&(t, _)| t.max(self.now));
        let done = self.advance_to(end).expect("end >= now");
        (end, done)
    }

    /// Drops bookkeeping for a ticket once its owner is done with it.
    pub fn forget(&mut self, ticket: TicketId) {
        self.tickets.remove(&ticket);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    #[test]
    fn cid_matches_independent_hash() {
        let cid = ContentId::of(b"x");
        assert_eq!(
            cid.as_str(),
            "cid:2d711642b726b04401627ca9fbac32f5c8530fb1903cc4db02258717921a4881"
        );
        assert_eq!(cid.as_str().len(), 68);
        assert_eq!(ContentId::parse(cid.as_str()), Ok(cid.clone()));
        assert!(ContentId::parse("cid:XYZ").is_err());
        assert!(ContentId::parse(&cid.as_str().to_uppercase()).is_err());
    }

    #[test]
    fn add_and_cat() {
        let mut c = Cluster::new(1, NetworkModel::default());
        let a = c.add(0, b"hello").unwrap();
        let b = c.add(0, b"hello").unwrap();
        assert_eq!(a.cid, b.cid);
        assert_eq!(c.node(0).unwrap().store().len(), 1);
        assert_eq!(c.add(0, b""), Err(StorageError::EmptyContent));
        assert_eq!(c.cat(0, &a.cid).unwrap(), CatResult::Local(Arc::from(&b"hello"[..])));
        let unknown = ContentId::of(b"nope");
        assert_eq!(c.cat(0, &unknown), Err(StorageError::UnknownCid(unknown)));
        assert_eq!(c.add(3, b"x"), Err(StorageError::UnknownNode(3)));
    }

    #[test]
    fn remote_fetch_follows_delivery_formula() {
        let net = NetworkModel::new(40, 3);
        let mut c = Cluster::new(2, net).manual_replication();
        let data = vec![7u8; 1000];
        let r = c.add(0, &data).unwrap();
        c.advance_to(500).unwrap();
        assert!(!c.has(1, &r.cid));
        let CatResult::Pending(t) = c.cat(1, &r.cid).unwrap() else {
            panic!("expected a remote fetch")
        };
        let due = 500 + net.delivery_time(1000);
        assert_eq!(due, 500 + 40 + 334);
        assert!(c.advance_to(due - 1).unwrap().is_empty());
        assert!(c.fetched(t).is_none());
        let done = c.advance_to(due).unwrap();
        assert_eq!(done.len(), 1);
        assert_eq!(done[0].completed_at, due);
        assert_eq!(&*c.fetched(t).unwrap(), &data[..]);
        // a read does not replicate
        assert!(!c.has(1, &r.cid));
    }

    #[test]
    fn add_replicates_to_every_peer_through_shared_medium() {
        let net = NetworkModel::new(10, 1);
        let mut c = Cluster::new(3, net);
        let r = c.add(0, &[1u8; 100]).unwrap();
        assert!(c.has(0, &r.cid) && !c.has(1, &r.cid));
        assert_eq!(c.next_delivery(), Some(110));
        let (end, done) = c.quiesce();
        // second replica waits for the medium
        assert_eq!(end, 210);
        assert_eq!(done, vec![Completion { ticket: r.ticket, cid: r.cid.clone(), started_at: 0, completed_at: 210 }]);
        assert!((0..3).all(|n| c.has(n, &r.cid)));
    }

    #[test]
    fn upload_then_replication() {
        let net = NetworkModel::new(5, 10);
        let mut c = Cluster::new(2, net);
        let a = c.upload(0, &[3u8; 100]).unwrap();
        let b = c.upload(1, &[3u8; 100]).unwrap();
        // uploads: [0,10]->15, [10,20]->25; node 0 pushes to node 1 at 15: [20,30]->35
        let done = c.advance_to(1000).unwrap();
        let at: BTreeMap<TicketId, u64> = done.iter().map(|d| (d.ticket, d.completed_at)).collect();
        assert_eq!(at[&a.ticket], 35);
        assert_eq!(at[&b.ticket], 25);
    }

    #[test]
    fn sync_counts() {
        let mut c = Cluster::new(2, NetworkModel::default()).manual_replication();
        let r = c.add(0, b"one").unwrap();
        assert_eq!(c.sync(1).unwrap(), 1);
        // already in flight
        assert_eq!(c.sync(1).unwrap(), 0);
        c.quiesce();
        assert!(c.has(1, &r.cid));
        assert_eq!(c.sync(1).unwrap(), 0);
        assert_eq!(c.sync(0).unwrap(), 0);
    }

    proptest! {
        #[test]
        fn cat_of_add_is_identity(data in proptest::collection::vec(any::<u8>(), 1..2048), node in 0usize..3, reader in 0usize..3) {
            let mut c = Cluster::new(3, NetworkModel::default());
            let r = c.add(node, &data).unwrap();
            prop_assert!(r.cid.verifies(&data));
            let got = match c.cat(reader, &r.cid).unwrap() {
                CatResult::Local(d) => d,
                CatResult::Pending(t) => {
                    c.quiesce();
                    c.fetched(t).unwrap()
                }
            };
            prop_assert_eq!(&*got, &data[..]);
            // cid does not depend on which node stored it
            let mut other = Cluster::new(3, NetworkModel::default());
            prop_assert_eq!(other.add((node + 1) % 3, &data).unwrap().cid, r.cid);
        }

        #[test]
        fn eventual_consistency(
            n in 2usize..6,
            inserts in proptest::collection::vec((0usize..6, 0u64..500, proptest::collection::vec(any::<u8>(), 1..300)), 1..20),
            manual in any::<bool>(),
        ) {
            let mut c = Cluster::new(n, NetworkModel::new(3, 4));
            if manual {
                c = c.manual_replication();
            }
            let mut t = 0;
            for (node, gap, data) in inserts {
                t += gap;
                c.advance_to(t).unwrap();
                c.add(node % n, &data).unwrap();
            }
            if manual {
                for node in 0..n {
                    c.sync(node).unwrap();
                }
            }
            c.quiesce();
            let first = c.node(0).unwrap().store().clone();
            for node in 1..n {
                prop_assert_eq!(c.node(node).unwrap().store(), &first);
            }
            for (cid, data) in &first {
                prop_assert!(cid.verifies(data));
            }
            let all: BTreeSet<&ContentId> = first.keys().collect();
            prop_assert_eq!(all.len(), first.len());
        }
    }
}
