//! Deterministic single-writer ledger on a virtual clock.
//!
//! Contracts live behind a [`Runtime`]. Transactions queue until a block
//! whose timestamp is at or after their `submitted_at`; within a block they
//! run in `(submitted_at, sender, nonce, tx_hash)` order. A failing
//! transaction is still included and gets a receipt, but its events are
//! discarded and contracts are expected to validate before mutating.

pub mod codec;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use ed25519_dalek::VerifyingKey;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use codec::{CodecError, Decoder, Encoder};

pub type TxHash = [u8; 32];

pub const DEFAULT_BLOCK_INTERVAL_MS: u64 = 1000;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AccountId(pub [u8; 20]);

impl AccountId {
    /// First 20 bytes of SHA-256 over the raw public key bytes.
    pub fn from_public_key_bytes(key: &[u8]) -> Self {
        let digest = Sha256::digest(key);
        AccountId(digest[..20].try_into().expect("20 <= 32"))
    }

    pub fn as_bytes(&self) -> &[u8; 20] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        let bytes = hex::decode(s).ok()?;
        Some(AccountId(bytes.try_into().ok()?))
    }
}

impl fmt::Display for AccountId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for AccountId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AccountId({})", self.to_hex())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub sender: AccountId,
    pub nonce: u64,
    pub target: String,
    pub operation: String,
    pub args: Vec<u8>,
    pub submitted_at: u64,
    pub tx_hash: TxHash,
}

impl Transaction {
    pub fn new(
        sender: AccountId,
        nonce: u64,
        target: &str,
        operation: &str,
        args: Vec<u8>,
        submitted_at: u64,
    ) -> Self {
        let mut tx = Transaction {
            sender,
            nonce,
            target: target.to_string(),
            operation: operation.to_string(),
            args,
            submitted_at,
            tx_hash: [0; 32],
        };
        tx.tx_hash = tx.compute_hash();
        tx
    }

    pub fn canonical_bytes(&self) -> Vec<u8> {
        Encoder::new()
            .account(&self.sender)
            .u64(self.nonce)
            .str(&self.target)
            .str(&self.operation)
            .bytes(&self.args)
            .u64(self.submitted_at)
            .finish()
    }

    pub fn compute_hash(&self) -> TxHash {
        Sha256::digest(self.canonical_bytes()).into()
    }

    fn order_key(&self) -> OrderKey {
        (self.submitted_at, self.sender, self.nonce, self.tx_hash)
    }
}

type OrderKey = (u64, AccountId, u64, TxHash);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub block_height: u64,
    pub index_in_block: u32,
    pub topic: String,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub height: u64,
    pub timestamp_ms: u64,
    pub txs: Vec<Transaction>,
    pub events: Vec<EventRecord>,
}

/// Value returned by a successful contract call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Output {
    None,
    Id(u64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receipt {
    pub tx_hash: TxHash,
    pub block_height: u64,
    pub block_time_ms: u64,
    pub index_in_block: u32,
    pub status: Result<Output, String>,
}

impl Receipt {
    pub fn is_success(&self) -> bool {
        self.status.is_ok()
    }

    pub fn id(&self) -> Option<u64> {
        match self.status {
            Ok(Output::Id(id)) => Some(id),
            _ => None,
        }
    }
}

/// Execution context handed to contracts for one transaction.
#[derive(Debug, Clone)]
pub struct ExecCtx {
    pub sender: AccountId,
    pub tx_hash: TxHash,
    pub now_ms: u64,
    pub block_height: u64,
    events: Vec<(String, Vec<u8>)>,
}

impl ExecCtx {
    pub fn new(sender: AccountId, tx_hash: TxHash, now_ms: u64, block_height: u64) -> Self {
        ExecCtx {
            sender,
            tx_hash,
            now_ms,
            block_height,
            events: Vec::new(),
        }
    }

    pub fn emit(&mut self, topic: &str, payload: Vec<u8>) {
        self.events.push((topic.to_string(), payload));
    }

    pub fn events(&self) -> &[(String, Vec<u8>)] {
        &self.events
    }

    pub fn take_events(&mut self) -> Vec<(String, Vec<u8>)> {
        std::mem::take(&mut self.events)
    }
}

/// Contract host. `execute` must leave state untouched when it returns an
/// error; the ledger drops the events of failed calls.
pub trait Runtime {
    fn has_contract(&self, target: &str) -> bool;
    fn execute(
        &mut self,
        ctx: &mut ExecCtx,
        target: &str,
        operation: &str,
        args: &[u8],
    ) -> Result<Output, String>;
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LedgerError {
    #[error("malformed public key")]
    MalformedKey,
    #[error("unknown sender {0}")]
    UnknownSender(AccountId),
    #[error("nonce {got} from {sender}, expected {expected}")]
    BadNonce {
        sender: AccountId,
        expected: u64,
        got: u64,
    },
    #[error("unknown target contract {0:?}")]
    UnknownTarget(String),
    #[error("tx hash does not match its contents")]
    HashMismatch,
    #[error("submission time {submitted_at} is before {floor}")]
    SubmittedInPast { submitted_at: u64, floor: u64 },
    #[error("time {0} is before the current clock")]
    ClockRegression(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VirtualClock {
    pub now_ms: u64,
    pub block_interval_ms: u64,
}

/// Event query. Height bounds are half-open: `[from_height, to_height)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventFilter {
    pub topic: Option<String>,
    pub from_height: Option<u64>,
    pub to_height: Option<u64>,
}

impl EventFilter {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn topic(topic: &str) -> Self {
        EventFilter {
            topic: Some(topic.to_string()),
            ..Self::default()
        }
    }

    pub fn heights(mut self, from: u64, to: u64) -> Self {
        self.from_height = Some(from);
        self.to_height = Some(to);
        self
    }

    fn matches(&self, e: &EventRecord) -> bool {
        self.topic.as_deref().is_none_or(|t| e.topic == t)
            && self.from_height.is_none_or(|h| e.block_height >= h)
            && self.to_height.is_none_or(|h| e.block_height < h)
    }
}

pub struct Ledger<R> {
    runtime: R,
    clock: VirtualClock,
    last_block_ms: u64,
    blocks: Vec<Block>,
    queue: BTreeMap<OrderKey, Transaction>,
    accounts: BTreeMap<AccountId, [u8; 32]>,
    /// Next nonce per sender, counting queued transactions.
    next_nonce: HashMap<AccountId, u64>,
    last_submitted: HashMap<AccountId, u64>,
    receipts: HashMap<TxHash, Receipt>,
}

impl<R: Runtime> Ledger<R> {
    pub fn new(runtime: R) -> Self {
        Self::with_interval(runtime, DEFAULT_BLOCK_INTERVAL_MS)
    }

    pub fn with_interval(runtime: R, block_interval_ms: u64) -> Self {
        assert!(block_interval_ms > 0, "block interval must be positive");
        Ledger {
            runtime,
            clock: VirtualClock {
                now_ms: 0,
                block_interval_ms,
            },
            last_block_ms: 0,
            blocks: Vec::new(),
            queue: BTreeMap::new(),
            accounts: BTreeMap::new(),
            next_nonce: HashMap::new(),
            last_submitted: HashMap::new(),
            receipts: HashMap::new(),
        }
    }

    pub fn runtime(&self) -> &R {
        &self.runtime
    }

    pub fn clock(&self) -> VirtualClock {
        self.clock
    }

    pub fn now(&self) -> u64 {
        self.clock.now_ms
    }

    pub fn height(&self) -> u64 {
        self.blocks.len() as u64
    }

    pub fn next_block_time(&self) -> u64 {
        self.last_block_ms + self.clock.block_interval_ms
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    /// Registers an Ed25519 public key. Idempotent.
    pub fn create_account(&mut self, public_key: &[u8]) -> Result<AccountId, LedgerError> {
        let key: [u8; 32] = public_key.try_into().map_err(|_| LedgerError::MalformedKey)?;
        VerifyingKey::from_bytes(&key).map_err(|_| LedgerError::MalformedKey)?;
        let id = AccountId::from_public_key_bytes(&key);
        self.accounts.insert(id, key);
        Ok(id)
    }

    pub fn public_key(&self, account: &AccountId) -> Option<&[u8; 32]> {
        self.accounts.get(account)
    }

    pub fn next_nonce(&self, account: &AccountId) -> u64 {
        self.next_nonce.get(account).copied().unwrap_or(0)
    }

    /// Queues a fully formed transaction.
    pub fn submit_tx(&mut self, tx: Transaction) -> Result<TxHash, LedgerError> {
        if !self.accounts.contains_key(&tx.sender) {
            return Err(LedgerError::UnknownSender(tx.sender));
        }
        if tx.compute_hash() != tx.tx_hash {
            return Err(LedgerError::HashMismatch);
        }
        let expected = self.next_nonce(&tx.sender);
        if tx.nonce != expected {
            return Err(LedgerError::BadNonce {
                sender: tx.sender,
                expected,
                got: tx.nonce,
            });
        }
        if !self.runtime.has_contract(&tx.target) {
            return Err(LedgerError::UnknownTarget(tx.target));
        }
        // a sender's transactions must not be scheduled out of nonce order
        let floor = self
            .clock
            .now_ms
            .max(self.last_submitted.get(&tx.sender).copied().unwrap_or(0));
        if tx.submitted_at < floor {
            return Err(LedgerError::SubmittedInPast {
                submitted_at: tx.submitted_at,
                floor,
            });
        }
        let hash = tx.tx_hash;
        self.next_nonce.insert(tx.sender, expected + 1);
        self.last_submitted.insert(tx.sender, tx.submitted_at);
        self.queue.insert(tx.order_key(), tx);
        Ok(hash)
    }

    /// Builds a transaction with the sender's next nonce, stamped now.
    pub fn submit(
        &mut self,
        sender: AccountId,
        target: &str,
        operation: &str,
        args: Vec<u8>,
    ) -> Result<TxHash, LedgerError> {
        let at = self.clock.now_ms;
        self.submit_at(sender, target, operation, args, at)
    }

    pub fn submit_at(
        &mut self,
        sender: AccountId,
        target: &str,
        operation: &str,
        args: Vec<u8>,
        submitted_at: u64,
    ) -> Result<TxHash, LedgerError> {
        let nonce = self.next_nonce(&sender);
        self.submit_tx(Transaction::new(sender, nonce, target, operation, args, submitted_at))
    }

    pub fn receipt(&self, tx_hash: &TxHash) -> Option<&Receipt> {
        self.receipts.get(tx_hash)
    }

    /// Moves the clock forward by `duration_ms`, producing every block whose
    /// slot falls inside the window. Returns the new blocks.
    pub fn advance(&mut self, duration_ms: u64) -> &[Block] {
        let target = self.clock.now_ms + duration_ms;
        self.advance_to(target).expect("target is not in the past")
    }

    pub fn advance_to(&mut self, t: u64) -> Result<&[Block], LedgerError> {
        if t < self.clock.now_ms {
            return Err(LedgerError::ClockRegression(t));
        }
        let first = self.blocks.len();
        while self.next_block_time() <= t {
            let ts = self.next_block_time();
            self.produce_block(ts);
        }
        self.clock.now_ms = t;
        Ok(&self.blocks[first..])
    }

    fn produce_block(&mut self, timestamp_ms: u64) {
        let height = self.blocks.len() as u64;
        let ready: Vec<OrderKey> = self
            .queue
            .range(..(timestamp_ms + 1, AccountId([0; 20]), 0, [0; 32]))
            .map(|(k, _)| *k)
            .collect();
        let mut txs = Vec::with_capacity(ready.len());
        let mut events = Vec::new();
        for (i, key) in ready.into_iter().enumerate() {
            let tx = self.queue.remove(&key).expect("key from range");
            let mut ctx = ExecCtx::new(tx.sender, tx.tx_hash, timestamp_ms, height);
            let status = self
                .runtime
                .execute(&mut ctx, &tx.target, &tx.operation, &tx.args);
            if status.is_ok() {
                for (topic, payload) in ctx.take_events() {
                    events.push(EventRecord {
                        block_height: height,
                        index_in_block: events.len() as u32,
                        topic,
                        payload,
                    });
                }
            }
            self.receipts.insert(
                tx.tx_hash,
                Receipt {
                    tx_hash: tx.tx_hash,
                    block_height: height,
                    block_time_ms: timestamp_ms,
                    index_in_block: i as u32,
                    status,
                },
            );
            txs.push(tx);
        }
        self.blocks.push(Block {
            height,
            timestamp_ms,
            txs,
            events,
        });
        self.last_block_ms = timestamp_ms;
    }

    /// Matching events in `(height, index)` order.
    pub fn get_events(&self, filter: &EventFilter) -> Vec<&EventRecord> {
        let lo = filter.from_height.unwrap_or(0) as usize;
        let hi = filter
            .to_height
            .map_or(self.blocks.len(), |h| (h as usize).min(self.blocks.len()));
        if lo >= hi {
            return Vec::new();
        }
        self.blocks[lo..hi]
            .iter()
            .flat_map(|b| b.events.iter())
            .filter(|e| filter.matches(e))
            .collect()
    }

    /// One `height,index,topic,hex(payload)` line per event.
    pub fn dump_events(&self) -> String {
        let mut out = String::new();
        for e in self.blocks.iter().flat_map(|b| b.events.iter()) {
            out.push_str(&format!(
                "{},{},{},{}\n",
                e.block_height,
                e.index_in_block,
                e.topic,
                hex::encode(&e.payload)
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ed25519_dalek::SigningKey;
    use proptest::prelude::*;

    /// Counter contract: `add` with a u64 argument, `fail` always errors.
    #[derive(Default)]
    struct Counter {
        total: u64,
    }

    impl Runtime for Counter {
        fn has_contract(&self, target: &str) -> bool {
            target == "counter"
        }

        fn execute(
            &mut self,
            ctx: &mut ExecCtx,
            _target: &str,
            op: &str,
            args: &[u8],
        ) -> Result<Output, String> {
            match op {
                "add" => {
                    let mut d = Decoder::new(args);
                    let v = d.u64().map_err(|e| e.to_string())?;
                    d.finish().map_err(|e| e.to_string())?;
                    ctx.emit("Added", args.to_vec());
                    self.total += v;
                    Ok(Output::Id(self.total))
                }
                "fail" => {
                    ctx.emit("Never", vec![]);
                    Err("always fails".into())
                }
                _ => Err(format!("unknown op {op}")),
            }
        }
    }

    fn key(seed: u8) -> [u8; 32] {
        SigningKey::from_bytes(&[seed; 32]).verifying_key().to_bytes()
    }

    fn ledger_with(n: u8) -> (Ledger<Counter>, Vec<AccountId>) {
        let mut l = Ledger::new(Counter::default());
        let ids = (0..n).map(|i| l.create_account(&key(i)).unwrap()).collect();
        (l, ids)
    }

    fn add(v: u64) -> Vec<u8> {
        Encoder::new().u64(v).finish()
    }

    const RFC8032_PUB: &str = "d75a980182b10ab7d54bfed3c964073a0ee172f3daa62325af021a68f707511a";

    #[test]
    fn account_ids_match_independent_hash() {
        let mut l = Ledger::new(Counter::default());
        let k = hex::decode(RFC8032_PUB).unwrap();
        let a = l.create_account(&k).unwrap();
        assert_eq!(a.to_hex(), "21fe31dfa154a261626bf854046fd2271b7bed4b");
        assert_eq!(l.create_account(&k).unwrap(), a);
        assert_eq!(
            AccountId::from_public_key_bytes(&[1u8; 32]).to_hex(),
            "72cd6e8422c407fb6d098690f1130b7ded7ec2f7"
        );
        assert_ne!(l.create_account(&key(9)).unwrap(), a);
    }

    #[test]
    fn malformed_keys_rejected() {
        let mut l = Ledger::new(Counter::default());
        assert_eq!(l.create_account(&[0u8; 31]), Err(LedgerError::MalformedKey));
        // y = 2 does not decode to a curve point
        let mut bad = [0u8; 32];
        bad[0] = 2;
        assert_eq!(l.create_account(&bad), Err(LedgerError::MalformedKey));
    }

    #[test]
    fn nonces_and_targets() {
        let (mut l, ids) = ledger_with(1);
        let a = ids[0];
        l.submit_tx(Transaction::new(a, 0, "counter", "add", add(1), 0)).unwrap();
        l.submit_tx(Transaction::new(a, 1, "counter", "add", add(1), 0)).unwrap();
        let replay = l.submit_tx(Transaction::new(a, 1, "counter", "add", add(2), 0));
        assert!(matches!(replay, Err(LedgerError::BadNonce { expected: 2, .. })));
        let gap = l.submit_tx(Transaction::new(a, 5, "counter", "add", add(2), 0));
        assert!(matches!(gap, Err(LedgerError::BadNonce { .. })));
        let unknown = l.submit_tx(Transaction::new(a, 2, "bank", "add", add(2), 0));
        assert_eq!(unknown, Err(LedgerError::UnknownTarget("bank".into())));
        let mut forged = Transaction::new(a, 2, "counter", "add", add(2), 0);
        forged.args = add(3);
        assert_eq!(l.submit_tx(forged), Err(LedgerError::HashMismatch));
        let stranger = AccountId([7; 20]);
        assert!(matches!(
            l.submit(stranger, "counter", "add", add(1)),
            Err(LedgerError::UnknownSender(_))
        ));
    }

    #[test]
    fn block_counts_follow_floor_arithmetic() {
        let (mut l, _) = ledger_with(0);
        assert!(l.advance(0).is_empty());
        assert_eq!(l.advance(2500).len(), 2);
        assert_eq!(l.now(), 2500);
        assert_eq!(l.advance(499).len(), 0);
        assert_eq!(l.advance(1).len(), 1);
        let ts: Vec<u64> = l.blocks().iter().map(|b| b.timestamp_ms).collect();
        assert_eq!(ts, vec![1000, 2000, 3000]);
        let hs: Vec<u64> = l.blocks().iter().map(|b| b.height).collect();
        assert_eq!(hs, vec![0, 1, 2]);
    }

    #[test]
    fn future_submissions_wait_for_their_block() {
        let (mut l, ids) = ledger_with(1);
        let h = l.submit_at(ids[0], "counter", "add", add(4), 1500).unwrap();
        l.advance(1000);
        assert!(l.receipt(&h).is_none());
        l.advance(1000);
        let r = l.receipt(&h).unwrap();
        assert_eq!((r.block_height, r.block_time_ms), (1, 2000));
        assert_eq!(r.id(), Some(4));
        assert!(matches!(
            l.submit_at(ids[0], "counter", "add", add(1), 1999),
            Err(LedgerError::SubmittedInPast { .. })
        ));
    }

    #[test]
    fn failed_tx_is_included_without_events() {
        let (mut l, ids) = ledger_with(1);
        let bad = l.submit(ids[0], "counter", "fail", vec![]).unwrap();
        let good = l.submit(ids[0], "counter", "add", add(2)).unwrap();
        l.advance(1000);
        assert!(!l.receipt(&bad).unwrap().is_success());
        assert!(l.receipt(&good).unwrap().is_success());
        assert_eq!(l.blocks()[0].txs.len(), 2);
        let ev = l.get_events(&EventFilter::all());
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].topic, "Added");
        assert_eq!(ev[0].index_in_block, 0);
    }

    #[test]
    fn event_filters() {
        let (mut l, ids) = ledger_with(1);
        assert!(l.get_events(&EventFilter::all()).is_empty());
        for i in 0..5 {
            l.submit(ids[0], "counter", "add", add(i)).unwrap();
            l.advance(1000);
        }
        assert_eq!(l.get_events(&EventFilter::topic("Added")).len(), 5);
        assert!(l.get_events(&EventFilter::topic("Other")).is_empty());
        assert_eq!(l.get_events(&EventFilter::all().heights(1, 3)).len(), 2);
        assert!(l.get_events(&EventFilter::all().heights(3, 1)).is_empty());
        assert_eq!(
            l.dump_events().lines().next().unwrap(),
            "0,0,Added,0000000000000000"
        );
    }

    /// Schedule for the generated-ledger properties: (sender, delay, value).
    fn schedule() -> impl Strategy<Value = Vec<(u8, u64, u64)>> {
        proptest::collection::vec((0u8..4, 0u64..3000, 0u64..100), 0..40)
    }

    fn run(schedule: &[(u8, u64, u64)]) -> (Ledger<Counter>, Vec<TxHash>) {
        let (mut l, ids) = ledger_with(4);
        let mut last = [0u64; 4];
        let mut hashes = Vec::new();
        for &(s, delay, v) in schedule {
            let s = s as usize;
            last[s] += delay;
            hashes.push(l.submit_at(ids[s], "counter", "add", add(v), last[s]).unwrap());
        }
        l.advance(200_000);
        (l, hashes)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn replay_is_byte_identical(s in schedule()) {
            let (a, _) = run(&s);
            let (b, _) = run(&s);
            prop_assert_eq!(a.dump_events(), b.dump_events());
            prop_assert_eq!(a.blocks(), b.blocks());
        }

        #[test]
        fn every_tx_in_exactly_one_block_in_comparator_order(s in schedule()) {
            let (l, hashes) = run(&s);
            prop_assert_eq!(l.pending(), 0);
            let mut seen: Vec<TxHash> = Vec::new();
            for b in l.blocks() {
                let keys: Vec<OrderKey> = b.txs.iter().map(Transaction::order_key).collect();
                let mut sorted = keys.clone();
                sorted.sort();
                prop_assert_eq!(&keys, &sorted);
                for tx in &b.txs {
                    prop_assert!(tx.submitted_at <= b.timestamp_ms);
                    prop_assert!(tx.submitted_at + 1000 > b.timestamp_ms);
                    seen.push(tx.tx_hash);
                }
            }
            let mut want = hashes.clone();
            want.sort();
            seen.sort();
            prop_assert_eq!(seen, want);
        }

        #[test]
        fn disjoint_height_ranges_partition_the_log(s in schedule(), cut in 0u64..250) {
            let (l, _) = run(&s);
            let all: Vec<&EventRecord> = l.get_events(&EventFilter::all());
            let mut parts = l.get_events(&EventFilter::all().heights(0, cut));
            parts.extend(l.get_events(&EventFilter::all().heights(cut, u64::MAX)));
            prop_assert_eq!(all, parts);
        }

        #[test]
        fn timestamps_non_decreasing_heights_consecutive(s in schedule()) {
            let (l, _) = run(&s);
            for (i, w) in l.blocks().windows(2).enumerate() {
                prop_assert!(w[0].timestamp_ms <= w[1].timestamp_ms);
                prop_assert_eq!(w[0].height, i as u64);
                prop_assert_eq!(w[1].height, i as u64 + 1);
            }
        }
    }

    #[test]
    fn comparator_is_exhaustively_the_documented_tuple() {
        // every combination of two timestamps, two senders and two nonces
        let (mut l, ids) = ledger_with(2);
        let mut order = Vec::new();
        for &t in &[1000u64, 1000] {
            for &s in &[1usize, 0] {
                let tx = Transaction::new(ids[s], l.next_nonce(&ids[s]), "counter", "add", add(t), t);
                order.push(tx.order_key());
                l.submit_tx(tx).unwrap();
            }
        }
        l.advance(1000);
        order.sort();
        let got: Vec<OrderKey> = l.blocks()[0].txs.iter().map(Transaction::order_key).collect();
        assert_eq!(got, order);
        assert!(got.windows(2).all(|w| (w[0].0, w[0].1, w[0].2) <= (w[1].0, w[1].1, w[1].2)));
    }
}
