//! Oracle contract and off-chain oracle nodes.
//!
//! The contract emits `IPFS_Add_Event` / `IPFS_Cat_Event`; every registered
//! node reacts on its own storage node and reports back with
//! `submit_response`. A value is final once ⌊N/2⌋+1 nodes reported it. With
//! no such value the request stays pending until its deadline, after which
//! anyone may expire it.
//!
//! Requests are keyed by id, so one retriever may own many values.

use std::collections::BTreeMap;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::{AccountId, CodecError, Decoder, Encoder, EventRecord, ExecCtx, Output};
use crate::storage::{CatResult, Cluster, Completion, ContentId, TicketId};

pub const TOPIC_ADD: &str = "IPFS_Add_Event";
pub const TOPIC_CAT: &str = "IPFS_Cat_Event";
pub const TOPIC_FINALIZED: &str = "Oracle_Finalized";
pub const TOPIC_FAILED: &str = "Oracle_Failed";

pub const DEFAULT_DEADLINE_MS: u64 = 30_000;

pub type RequestId = u64;
pub type NodeId = u32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("{0} is not the oracle admin")]
    NotAdmin(AccountId),
    #[error("node {0} is already registered")]
    DuplicateNode(NodeId),
    #[error("account {0} already runs a node")]
    DuplicateAccount(AccountId),
    #[error("ciphertext is empty")]
    EmptyCiphertext,
    #[error("ciphertext is not valid base64")]
    InvalidCiphertext,
    #[error("no request {0}")]
    UnknownRequest(RequestId),
    #[error("request {0} is not an add request")]
    NotAnAdd(RequestId),
    #[error("request {0} is not finalized")]
    NotFinalized(RequestId),
    #[error("request {0} is no longer pending")]
    NotPending(RequestId),
    #[error("{0} is not the authorized retriever")]
    Unauthorized(AccountId),
    #[error("{0} is not a registered node")]
    NotANode(AccountId),
    #[error("node {node} already answered request {request}")]
    DuplicateAck { node: NodeId, request: RequestId },
    #[error("request {request} deadline {deadline} not reached")]
    DeadlineNotReached { request: RequestId, deadline: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultMode {
    Honest,
    /// Reports a corrupted value. All such nodes corrupt identically, the
    /// worst case for a majority vote.
    WrongValue,
    Silent,
}

impl FaultMode {
    fn code(self) -> u8 {
        match self {
            FaultMode::Honest => 0,
            FaultMode::WrongValue => 1,
            FaultMode::Silent => 2,
        }
    }

    fn from_code(c: u8) -> Result<Self, CodecError> {
        match c {
            0 => Ok(FaultMode::Honest),
            1 => Ok(FaultMode::WrongValue),
            2 => Ok(FaultMode::Silent),
            _ => Err(CodecError::InvalidValue("fault mode")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeConfig {
    pub id: NodeId,
    pub account: AccountId,
    pub storage_node: usize,
    pub fault_mode: FaultMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RequestKind {
    Add,
    Cat { add_request: RequestId },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RequestStatus {
    Pending,
    Finalized,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleRequest {
    pub id: RequestId,
    pub kind: RequestKind,
    pub requester: AccountId,
    /// Base64 envelope; Add requests only.
    pub ciphertext: Option<String>,
    pub authorized_retriever: AccountId,
    pub acks: BTreeMap<NodeId, String>,
    pub finalized_value: Option<String>,
    pub status: RequestStatus,
    pub created_at: u64,
    pub deadline: u64,
    pub resolved_at: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleCall {
    RegisterNode(NodeConfig),
    TriggerAdd { ciphertext: String, retriever: AccountId },
    TriggerCat { add_request: RequestId },
    SubmitResponse { request_id: RequestId, value: String },
    ExpireRequest { request_id: RequestId },
}

impl OracleCall {
    pub fn encode(&self) -> (&'static str, Vec<u8>) {
        let e = Encoder::new();
        match self {
            OracleCall::RegisterNode(c) => (
                "register_node",
                e.u32(c.id)
                    .account(&c.account)
                    .u64(c.storage_node as u64)
                    .u8(c.fault_mode.code())
                    .finish(),
            ),
            OracleCall::TriggerAdd { ciphertext, retriever } => {
                ("trigger_add", e.str(ciphertext).account(retriever).finish())
            }
            OracleCall::TriggerCat { add_request } => ("trigger_cat", e.u64(*add_request).finish()),
            OracleCall::SubmitResponse { request_id, value } => {
                ("submit_response", e.u64(*request_id).str(value).finish())
            }
            OracleCall::ExpireRequest { request_id } => ("expire_request", e.u64(*request_id).finish()),
        }
    }

    pub fn decode(op: &str, args: &[u8]) -> Result<Self, CodecError> {
        let mut d = Decoder::new(args);
        let call = match op {
            "register_node" => OracleCall::RegisterNode(NodeConfig {
                id: d.u32()?,
                account: d.account()?,
                storage_node: usize::try_from(d.u64()?).map_err(|_| CodecError::InvalidValue("storage node"))?,
                fault_mode: FaultMode::from_code(d.u8()?)?,
            }),
            "trigger_add" => OracleCall::TriggerAdd {
                ciphertext: d.str()?.to_string(),
                retriever: d.account()?,
            },
            "trigger_cat" => OracleCall::TriggerCat { add_request: d.u64()? },
            "submit_response" => OracleCall::SubmitResponse {
                request_id: d.u64()?,
                value: d.str()?.to_string(),
            },
            "expire_request" => OracleCall::ExpireRequest { request_id: d.u64()? },
            other => return Err(CodecError::UnknownOperation(other.to_string())),
        };
        d.finish()?;
        Ok(call)
    }
}

/// Decoded `IPFS_Add_Event` payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AddEvent {
    pub request_id: RequestId,
    pub ciphertext: String,
    pub retriever: AccountId,
    pub requester: AccountId,
}

impl AddEvent {
    pub fn encode(&self) -> Vec<u8> {
        Encoder::new()
            .u64(self.request_id)
            .str(&self.ciphertext)
            .account(&self.retriever)
            .account(&self.requester)
            .finish()
    }

    pub fn decode(payload: &[u8]) -> Result<Self, CodecError> {
        let mut d = Decoder::new(payload);
        let e = AddEvent {
            request_id: d.u64()?,
            ciphertext: d.str()?.to_string(),
            retriever: d.account()?,
            requester: d.account()?,
        };
        d.finish()?;
        Ok(e)
    }
}

/// Decoded `IPFS_Cat_Event` payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CatEvent {
    pub request_id: RequestId,
    pub add_request: RequestId,
    pub cid: String,
    pub retriever: AccountId,
}

impl CatEvent {
    pub fn encode(&self) -> Vec<u8> {
        Encoder::new()
            .u64(self.request_id)
            .u64(self.add_request)
            .str(&self.cid)
            .account(&self.retriever)
            .finish()
    }

    pub fn decode(payload: &[u8]) -> Result<Self, CodecError> {
        let mut d = Decoder::new(payload);
        let e = CatEvent {
            request_id: d.u64()?,
            add_request: d.u64()?,
            cid: d.str()?.to_string(),
            retriever: d.account()?,
        };
        d.finish()?;
        Ok(e)
    }
}

/// Request id carried by `Oracle_Finalized` / `Oracle_Failed`.
pub fn resolution_request_id(payload: &[u8]) -> Result<RequestId, CodecError> {
    Decoder::new(payload).u64()
}

pub fn quorum(nodes: usize) -> usize {
    nodes / 2 + 1
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleContract {
    admin: AccountId,
    deadline_ms: u64,
    nodes: BTreeMap<NodeId, NodeConfig>,
    by_account: BTreeMap<AccountId, NodeId>,
    requests: BTreeMap<RequestId, OracleRequest>,
    next_id: RequestId,
}

impl OracleContract {
    pub fn new(admin: AccountId, deadline_ms: u64) -> Self {
        OracleContract {
            admin,
            deadline_ms,
            nodes: BTreeMap::new(),
            by_account: BTreeMap::new(),
            requests: BTreeMap::new(),
            next_id: 0,
        }
    }

    pub fn admin(&self) -> AccountId {
        self.admin
    }

    pub fn deadline_ms(&self) -> u64 {
        self.deadline_ms
    }

    pub fn nodes(&self) -> &BTreeMap<NodeId, NodeConfig> {
        &self.nodes
    }

    pub fn quorum(&self) -> usize {
        quorum(self.nodes.len())
    }

    pub fn request(&self, id: RequestId) -> Result<&OracleRequest, OracleError> {
        self.requests.get(&id).ok_or(OracleError::UnknownRequest(id))
    }

    pub fn requests(&self) -> &BTreeMap<RequestId, OracleRequest> {
        &self.requests
    }

    pub fn execute(&mut self, ctx: &mut ExecCtx, call: OracleCall) -> Result<Output, OracleError> {
        match call {
            OracleCall::RegisterNode(c) => self.register_node(ctx, c).map(|_| Output::None),
            OracleCall::TriggerAdd { ciphertext, retriever } => {
                self.trigger_add(ctx, ciphertext, retriever).map(Output::Id)
            }
            OracleCall::TriggerCat { add_request } => self.trigger_cat(ctx, add_request).map(Output::Id),
            OracleCall::SubmitResponse { request_id, value } => {
                self.submit_response(ctx, request_id, value).map(|_| Output::None)
            }
            OracleCall::ExpireRequest { request_id } => {
                self.expire_request(ctx, request_id).map(|_| Output::None)
            }
        }
    }

    pub fn register_node(&mut self, ctx: &mut ExecCtx, config: NodeConfig) -> Result<(), OracleError> {
        if ctx.sender != self.admin {
            return Err(OracleError::NotAdmin(ctx.sender));
        }
        if self.nodes.contains_key(&config.id) {
            return Err(OracleError::DuplicateNode(config.id));
        }
        if self.by_account.contains_key(&config.account) {
            return Err(OracleError::DuplicateAccount(config.account));
        }
        self.nodes.insert(config.id, config);
        self.by_account.insert(config.account, config.id);
        Ok(())
    }

    fn new_request(&mut self, ctx: &ExecCtx, kind: RequestKind, ciphertext: Option<String>, retriever: AccountId) -> RequestId {
        let id = self.next_id;
        self.next_id += 1;
        self.requests.insert(
            id,
            OracleRequest {
                id,
                kind,
                requester: ctx.sender,
                ciphertext,
                authorized_retriever: retriever,
                acks: BTreeMap::new(),
                finalized_value: None,
                status: RequestStatus::Pending,
                created_at: ctx.now_ms,
                deadline: ctx.now_ms + self.deadline_ms,
                resolved_at: None,
            },
        );
        id
    }

    /// Records the sealed envelope and who may read it back; nodes store it.
    pub fn trigger_add(&mut self, ctx: &mut ExecCtx, ciphertext: String, retriever: AccountId) -> Result<RequestId, OracleError> {
        if ciphertext.is_empty() {
            return Err(OracleError::EmptyCiphertext);
        }
        B64.decode(&ciphertext).map_err(|_| OracleError::InvalidCiphertext)?;
        let event = AddEvent {
            request_id: self.next_id,
            ciphertext: ciphertext.clone(),
            retriever,
            requester: ctx.sender,
        };
        let id = self.new_request(ctx, RequestKind::Add, Some(ciphertext), retriever);
        ctx.emit(TOPIC_ADD, event.encode());
        Ok(id)
    }

    pub fn trigger_cat(&mut self, ctx: &mut ExecCtx, add_request: RequestId) -> Result<RequestId, OracleError> {
        let add = self.request(add_request)?;
        if add.kind != RequestKind::Add {
            return Err(OracleError::NotAnAdd(add_request));
        }
        if ctx.sender != add.authorized_retriever {
            return Err(OracleError::Unauthorized(ctx.sender));
        }
        let cid = match (&add.status, &add.finalized_value) {
            (RequestStatus::Finalized, Some(v)) => v.clone(),
            _ => return Err(OracleError::NotFinalized(add_request)),
        };
        let retriever = add.authorized_retriever;
        let event = CatEvent {
            request_id: self.next_id,
            add_request,
            cid,
            retriever,
        };
        let id = self.new_request(ctx, RequestKind::Cat { add_request }, None, retriever);
        ctx.emit(TOPIC_CAT, event.encode());
        Ok(id)
    }

    pub fn submit_response(&mut self, ctx: &mut ExecCtx, request_id: RequestId, value: String) -> Result<(), OracleError> {
        let node = *self
            .by_account
            .get(&ctx.sender)
            .ok_or(OracleError::NotANode(ctx.sender))?;
        let quorum = self.quorum();
        let req = self
            .requests
            .get_mut(&request_id)
            .ok_or(OracleError::UnknownRequest(request_id))?;
        if req.status != RequestStatus::Pending {
            return Err(OracleError::NotPending(request_id));
        }
        if req.acks.contains_key(&node) {
            return Err(OracleError::DuplicateAck {
                node,
                request: request_id,
            });
        }
        let votes = 1 + req.acks.values().filter(|v| **v == value).count();
        req.acks.insert(node, value.clone());
        if votes >= quorum {
            req.status = RequestStatus::Finalized;
            req.finalized_value = Some(value.clone());
            req.resolved_at = Some(ctx.now_ms);
            ctx.emit(TOPIC_FINALIZED, Encoder::new().u64(request_id).str(&value).finish());
        }
        Ok(())
    }

    pub fn expire_request(&mut self, ctx: &mut ExecCtx, request_id: RequestId) -> Result<(), OracleError> {
        let req = self
            .requests
            .get_mut(&request_id)
            .ok_or(OracleError::UnknownRequest(request_id))?;
        if req.status != RequestStatus::Pending {
            return Err(OracleError::NotPending(request_id));
        }
        if ctx.now_ms < req.deadline {
            return Err(OracleError::DeadlineNotReached {
                request: request_id,
                deadline: req.deadline,
            });
        }
        req.status = RequestStatus::Failed;
        req.resolved_at = Some(ctx.now_ms);
        ctx.emit(TOPIC_FAILED, Encoder::new().u64(request_id).finish());
        Ok(())
    }

    /// Finalized ciphertext of a Cat request, for its retriever only.
    pub fn get_values(&self, caller: AccountId, request_id: RequestId) -> Result<&str, OracleError> {
        let req = self.request(request_id)?;
        if !matches!(req.kind, RequestKind::Cat { .. }) {
            return Err(OracleError::UnknownRequest(request_id));
        }
        if caller != req.authorized_retriever {
            return Err(OracleError::Unauthorized(caller));
        }
        match (&req.status, &req.finalized_value) {
            (RequestStatus::Finalized, Some(v)) => Ok(v),
            _ => Err(OracleError::NotFinalized(request_id)),
        }
    }

    /// Pending requests whose deadline has passed at `now`.
    pub fn overdue(&self, now: u64) -> Vec<RequestId> {
        self.requests
            .values()
            .filter(|r| r.status == RequestStatus::Pending && now >= r.deadline)
            .map(|r| r.id)
            .collect()
    }
}

/// Value a `WrongValue` node reports instead of `honest`.
pub fn corrupt(honest: &str) -> String {
    if honest.starts_with(ContentId::PREFIX) {
        ContentId::of(format!("corrupt:{honest}").as_bytes()).to_string()
    } else {
        let mut bytes = B64.decode(honest).unwrap_or_default();
        bytes.push(0xff);
        if let Some(b) = bytes.first_mut() {
            *b ^= 0xff;
        }
        B64.encode(bytes)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Work {
    Add(RequestId),
    Cat(RequestId),
}

/// Off-chain node: watches oracle events and answers through its storage
/// node. Returned calls must be submitted as transactions from `account()`.
#[derive(Debug, Clone)]
pub struct OracleNode {
    config: NodeConfig,
    waiting: BTreeMap<TicketId, Work>,
}

impl OracleNode {
    pub fn new(config: NodeConfig) -> Self {
        OracleNode {
            config,
            waiting: BTreeMap::new(),
        }
    }

    pub fn config(&self) -> &NodeConfig {
        &self.config
    }

    pub fn account(&self) -> AccountId {
        self.config.account
    }

    fn answer(&self, request_id: RequestId, honest: String) -> Option<OracleCall> {
        let value = match self.config.fault_mode {
            FaultMode::Honest => honest,
            FaultMode::WrongValue => corrupt(&honest),
            FaultMode::Silent => return None,
        };
        Some(OracleCall::SubmitResponse { request_id, value })
    }

    /// Reacts to one ledger event. Adds upload the envelope to this node's
    /// storage node and answer once it is replicated everywhere; cats read
    /// it back. Returns calls that can be submitted right away.
    pub fn on_event(&mut self, event: &EventRecord, contract: &OracleContract, storage: &mut Cluster) -> Vec<OracleCall> {
        if self.config.fault_mode == FaultMode::Silent {
            return Vec::new();
        }
        let pending = |id| contract.request(id).is_ok_and(|r| r.status == RequestStatus::Pending);
        match event.topic.as_str() {
            TOPIC_ADD => {
                let Ok(ev) = AddEvent::decode(&event.payload) else {
                    return Vec::new();
                };
                if !pending(ev.request_id) {
                    return Vec::new();
                }
                let Ok(bytes) = B64.decode(&ev.ciphertext) else {
                    return Vec::new();
                };
                match storage.upload(self.config.storage_node, &bytes) {
                    Ok(r) => {
                        self.waiting.insert(r.ticket, Work::Add(ev.request_id));
                    }
                    Err(_) => return Vec::new(),
                }
                Vec::new()
            }
            TOPIC_CAT => {
                let Ok(ev) = CatEvent::decode(&event.payload) else {
                    return Vec::new();
                };
                if !pending(ev.request_id) {
                    return Vec::new();
                }
                let Ok(cid) = ContentId::parse(&ev.cid) else {
                    return Vec::new();
                };
                match storage.cat(self.config.storage_node, &cid) {
                    Ok(CatResult::Local(bytes)) => self.answer(ev.request_id, B64.encode(&bytes)).into_iter().collect(),
                    Ok(CatResult::Pending(t)) => {
                        self.waiting.insert(t, Work::Cat(ev.request_id));
                        Vec::new()
                    }
                    Err(_) => Vec::new(),
                }
            }
            _ => Vec::new(),
        }
    }

    /// Handles a finished storage ticket if it belongs to this node.
    pub fn on_completion(&mut self, done: &Completion, storage: &mut Cluster) -> Option<OracleCall> {
        let work = self.waiting.remove(&done.ticket)?;
        let call = match work {
            Work::Add(id) => self.answer(id, done.cid.to_string()),
            Work::Cat(id) => {
                let bytes = storage.fetched(done.ticket)?;
                self.answer(id, B64.encode(&bytes))
            }
        };
        storage.forget(done.ticket);
        call
    }

    pub fn is_idle(&self) -> bool {
        self.waiting.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const ADMIN: AccountId = AccountId([0xaa; 20]);
    const PATIENT: AccountId = AccountId([0x01; 20]);
    const LAB: AccountId = AccountId([0x02; 20]);

    fn node_acct(i: u32) -> AccountId {
        AccountId([0x40 + i as u8; 20])
    }

    fn ctx(sender: AccountId, now: u64) -> ExecCtx {
        ExecCtx::new(sender, [0; 32], now, 0)
    }

    fn contract(n: u32) -> OracleContract {
        let mut c = OracleContract::new(ADMIN, DEFAULT_DEADLINE_MS);
        for i in 0..n {
            c.register_node(
                &mut ctx(ADMIN, 0),
                NodeConfig {
                    id: i,
                    account: node_acct(i),
                    storage_node: i as usize,
                    fault_mode: FaultMode::Honest,
                },
            )
            .unwrap();
        }
        c
    }

    fn add(c: &mut OracleContract) -> RequestId {
        c.trigger_add(&mut ctx(LAB, 0), B64.encode(b"sealed"), PATIENT).unwrap()
    }

    fn ack(c: &mut OracleContract, node: u32, id: RequestId, v: &str) -> Result<(), OracleError> {
        c.submit_response(&mut ctx(node_acct(node), 10), id, v.to_string())
    }

    #[test]
    fn registration_and_quorum() {
        assert_eq!(contract(3).quorum(), 2);
        assert_eq!(contract(5).quorum(), 3);
        assert_eq!(contract(2).quorum(), 2);
        assert_eq!(contract(1).quorum(), 1);
        let mut c = contract(1);
        let cfg = NodeConfig {
            id: 0,
            account: node_acct(9),
            storage_node: 0,
            fault_mode: FaultMode::Honest,
        };
        assert_eq!(c.register_node(&mut ctx(ADMIN, 0), cfg), Err(OracleError::DuplicateNode(0)));
        let cfg = NodeConfig { id: 7, ..cfg };
        assert_eq!(c.register_node(&mut ctx(LAB, 0), cfg), Err(OracleError::NotAdmin(LAB)));
    }

    #[test]
    fn trigger_add_validates_and_emits() {
        let mut c = contract(1);
        let mut x = ctx(LAB, 0);
        assert_eq!(c.trigger_add(&mut x, String::new(), PATIENT), Err(OracleError::EmptyCiphertext));
        assert_eq!(c.trigger_add(&mut x, "not base64!".into(), PATIENT), Err(OracleError::InvalidCiphertext));
        let ct = B64.encode([9u8; 100]);
        let id = c.trigger_add(&mut x, ct.clone(), PATIENT).unwrap();
        assert_eq!(c.request(id).unwrap().status, RequestStatus::Pending);
        let (topic, payload) = &x.events()[0];
        assert_eq!(topic, TOPIC_ADD);
        let ev = AddEvent::decode(payload).unwrap();
        assert_eq!(B64.decode(&ev.ciphertext).unwrap(), vec![9u8; 100]);
        assert_eq!((ev.request_id, ev.retriever, ev.requester), (id, PATIENT, LAB));
    }

    #[test]
    fn majority_rules() {
        let mut c = contract(3);
        let id = add(&mut c);
        ack(&mut c, 0, id, "v").unwrap();
        ack(&mut c, 1, id, "w").unwrap();
        assert_eq!(c.request(id).unwrap().status, RequestStatus::Pending);
        assert_eq!(ack(&mut c, 1, id, "v"), Err(OracleError::DuplicateAck { node: 1, request: id }));
        ack(&mut c, 2, id, "v").unwrap();
        let r = c.request(id).unwrap();
        assert_eq!((r.status, r.finalized_value.as_deref()), (RequestStatus::Finalized, Some("v")));

        let mut c = contract(2);
        let id = add(&mut c);
        ack(&mut c, 0, id, "v").unwrap();
        ack(&mut c, 1, id, "w").unwrap();
        assert_eq!(c.request(id).unwrap().status, RequestStatus::Pending);
        assert!(matches!(
            c.expire_request(&mut ctx(LAB, 29_999), id),
            Err(OracleError::DeadlineNotReached { .. })
        ));
        c.expire_request(&mut ctx(LAB, 30_000), id).unwrap();
        assert_eq!(c.request(id).unwrap().status, RequestStatus::Failed);
        assert_eq!(c.expire_request(&mut ctx(LAB, 40_000), id), Err(OracleError::NotPending(id)));

        let mut c = contract(1);
        let id = add(&mut c);
        ack(&mut c, 0, id, "v").unwrap();
        assert_eq!(c.request(id).unwrap().finalized_value.as_deref(), Some("v"));
        assert_eq!(c.expire_request(&mut ctx(LAB, 90_000), id), Err(OracleError::NotPending(id)));
        assert_eq!(
            c.submit_response(&mut ctx(LAB, 0), id, "v".into()),
            Err(OracleError::NotANode(LAB))
        );
        assert_eq!(ack(&mut c, 0, 99, "v"), Err(OracleError::UnknownRequest(99)));
    }

    #[test]
    fn cat_and_get_values() {
        let mut c = contract(1);
        let id = add(&mut c);
        assert_eq!(c.trigger_cat(&mut ctx(PATIENT, 0), id), Err(OracleError::NotFinalized(id)));
        ack(&mut c, 0, id, "cid:x").unwrap();
        assert_eq!(c.trigger_cat(&mut ctx(LAB, 0), id), Err(OracleError::Unauthorized(LAB)));
        let mut x = ctx(PATIENT, 5);
        let cat = c.trigger_cat(&mut x, id).unwrap();
        let ev = CatEvent::decode(&x.events()[0].1).unwrap();
        assert_eq!((ev.request_id, ev.add_request, ev.cid.as_str()), (cat, id, "cid:x"));
        assert_eq!(c.trigger_cat(&mut ctx(PATIENT, 0), cat), Err(OracleError::NotAnAdd(cat)));
        assert_eq!(c.get_values(PATIENT, cat), Err(OracleError::NotFinalized(cat)));
        ack(&mut c, 0, cat, "ZW52").unwrap();
        assert_eq!(c.get_values(PATIENT, cat), Ok("ZW52"));
        assert_eq!(c.get_values(LAB, cat), Err(OracleError::Unauthorized(LAB)));
    }

    #[test]
    fn corruption_is_deterministic_and_distinct() {
        let cid = ContentId::of(b"a").to_string();
        assert_eq!(corrupt(&cid), corrupt(&cid));
        assert_ne!(corrupt(&cid), cid);
        assert!(ContentId::parse(&corrupt(&cid)).is_ok());
        let ct = B64.encode(b"payload");
        assert_ne!(corrupt(&ct), ct);
        assert_eq!(corrupt(&ct), corrupt(&ct));
    }

    #[test]
    fn calls_round_trip_through_codec() {
        let calls = [
            OracleCall::RegisterNode(NodeConfig {
                id: 3,
                account: LAB,
                storage_node: 2,
                fault_mode: FaultMode::Silent,
            }),
            OracleCall::TriggerAdd { ciphertext: "QQ==".into(), retriever: PATIENT },
            OracleCall::TriggerCat { add_request: 4 },
            OracleCall::SubmitResponse { request_id: 4, value: "x".into() },
            OracleCall::ExpireRequest { request_id: 4 },
        ];
        for c in calls {
            let (op, args) = c.encode();
            assert_eq!(OracleCall::decode(op, &args).unwrap(), c);
        }
    }

    /// Every placement of wrong-value nodes among N, acks in node order.
    #[test]
    fn exhaustive_fault_placement() {
        for n in [1u32, 2, 3, 5] {
            let strict = quorum(n as usize);
            for mask in 0u32..(1 << n) {
                let faulty = mask.count_ones() as usize;
                let mut c = contract(n);
                let id = add(&mut c);
                for i in 0..n {
                    let v = if mask & (1 << i) != 0 { corrupt("cid:honest") } else { "cid:honest".into() };
                    let _ = ack(&mut c, i, id, &v);
                }
                let r = c.request(id).unwrap();
                if faulty < strict && n as usize - faulty >= strict {
                    assert_eq!(r.finalized_value.as_deref(), Some("cid:honest"), "n={n} mask={mask:b}");
                } else if n == 2 && faulty == 1 {
                    assert_eq!(r.status, RequestStatus::Pending);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn outcome_independent_of_ack_order(
            n in prop_oneof![Just(1u32), Just(2), Just(3), Just(5)],
            values in proptest::collection::vec(0u8..3, 5),
            perm in Just((0u32..5).collect::<Vec<_>>()).prop_shuffle(),
        ) {
            let run = |order: &[u32]| {
                let mut c = contract(n);
                let id = add(&mut c);
                for &i in order.iter().filter(|&&i| i < n) {
                    let _ = ack(&mut c, i, id, &format!("v{}", values[i as usize]));
                }
                let r = c.request(id).unwrap().clone();
                (r.status, r.finalized_value)
            };
            let natural: Vec<u32> = (0..5).collect();
            prop_assert_eq!(run(&natural), run(&perm));
        }
    }
}
