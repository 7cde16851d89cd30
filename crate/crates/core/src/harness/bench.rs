//! Virtual-time benchmarks: batch against sequential transfers, and oracle
//! finalization time across node counts and payload sizes. Wall time is
//! only reported when asked for and never checked.

use std::collections::BTreeMap;
use std::time::Instant;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use rand::{Rng, RngCore};

use crate::ledger::AccountId;
use crate::oracle::{FaultMode, OracleCall, RequestStatus};
use crate::sim::{SimConfig, Simulation};
use crate::token::TokenCall;

use super::{seeded_rng, HarnessError};

pub const ORACLE_NODE_COUNTS: [usize; 4] = [1, 2, 3, 5];
pub const ORACLE_PAYLOAD_SIZES: [usize; 2] = [12_288, 24_576];
pub const ORACLE_REQUESTS: usize = 300;
pub const ORACLE_DEADLINE_MS: u64 = 120_000;
pub const BATCH_LEGS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct BatchRow {
    pub mode: &'static str,
    pub legs: usize,
    pub transactions: usize,
    pub virtual_ms: u64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchReport {
    /// Deployment, sequential, batch.
    pub rows: Vec<BatchRow>,
    pub balances: BTreeMap<AccountId, u64>,
}

impl BatchReport {
    pub fn row(&self, mode: &str) -> &BatchRow {
        self.rows.iter().find(|r| r.mode == mode).expect("known mode")
    }

    pub fn to_csv(&self, wall_time: bool) -> String {
        let mut out = String::from("mode,legs,transactions,virtual_ms");
        out.push_str(if wall_time { ",wall_ms\n" } else { "\n" });
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{}", r.mode, r.legs, r.transactions, r.virtual_ms));
            if wall_time {
                out.push_str(&format!(",{:.3}", r.wall_ms));
            }
            out.push('\n');
        }
        out
    }
}

fn recipients(sim: &mut Simulation, legs: usize) -> Result<Vec<(AccountId, u64)>, HarnessError> {
    (0..legs)
        .map(|i| Ok((sim.actor(&format!("helene/bench/recipient-{i}"))?.id, 1 + (i as u64 % 10))))
        .collect()
}

fn txs_since(sim: &Simulation, height: usize, sender: AccountId) -> usize {
    sim.ledger().blocks()[height..]
        .iter()
        .flat_map(|b| &b.txs)
        .filter(|t| t.sender == sender)
        .count()
}

/// `legs` transfers from the admin, first one at a time with each waiting
/// for its receipt, then as one batch on a fresh ledger.
pub fn batch(legs: usize) -> Result<BatchReport, HarnessError> {
    let cfg = SimConfig::default();
    let wait = 10 * cfg.block_interval_ms;

    let wall = Instant::now();
    let mut seq = Simulation::new(&cfg)?;
    let deploy = BatchRow {
        mode: "deploy",
        legs: 0,
        transactions: txs_since(&seq, 0, seq.admin().id),
        virtual_ms: seq.now(),
        wall_ms: wall.elapsed().as_secs_f64() * 1e3,
    };
    let admin = seq.admin().id;
    let to = recipients(&mut seq, legs)?;
    let (h0, t0, wall) = (seq.ledger().blocks().len(), seq.now(), Instant::now());
    for &(to, amount) in &to {
        seq.transact(admin, TokenCall::Transfer { from: admin, to, amount }, wait)?;
    }
    let sequential = BatchRow {
        mode: "sequential",
        legs,
        transactions: txs_since(&seq, h0, admin),
        virtual_ms: seq.now() - t0,
        wall_ms: wall.elapsed().as_secs_f64() * 1e3,
    };

    let mut bat = Simulation::new(&cfg)?;
    let to = recipients(&mut bat, legs)?;
    let (h0, t0, wall) = (bat.ledger().blocks().len(), bat.now(), Instant::now());
    bat.transact(admin, TokenCall::TransferBatch { from: admin, legs: to }, wait)?;
    let batched = BatchRow {
        mode: "batch",
        legs,
        transactions: txs_since(&bat, h0, admin),
        virtual_ms: bat.now() - t0,
        wall_ms: wall.elapsed().as_secs_f64() * 1e3,
    };

    let balances = seq.platform().token.balances().clone();
    if &balances != bat.platform().token.balances() {
        return Err(HarnessError::Check("balance maps differ between the two runs".into()));
    }
    if sequential.transactions != legs || batched.transactions != 1 {
        return Err(HarnessError::Check(format!(
            "expected {legs} and 1 transactions, got {} and {}",
            sequential.transactions, batched.transactions
        )));
    }
    if legs > 1 && batched.virtual_ms >= sequential.virtual_ms {
        return Err(HarnessError::Check(format!(
            "batch took {} ms, sequential {} ms",
            batched.virtual_ms, sequential.virtual_ms
        )));
    }
    Ok(BatchReport {
        rows: vec![deploy, sequential, batched],
        balances,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub nodes: usize,
    pub size_bytes: usize,
    pub requests: usize,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub min_ms: u64,
    pub max_ms: u64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub rows: Vec<OracleRow>,
}

impl OracleReport {
    pub fn row(&self, nodes: usize, size: usize) -> Option<&OracleRow> {
        self.rows.iter().find(|r| r.nodes == nodes && r.size_bytes == size)
    }

    pub fn to_csv(&self, wall_time: bool) -> String {
        let mut out = String::from("nodes,size_bytes,requests,mean_ms,median_ms,min_ms,max_ms");
        out.push_str(if wall_time { ",wall_ms\n" } else { "\n" });
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:.3},{:.1},{},{}",
                r.nodes, r.size_bytes, r.requests, r.mean_ms, r.median_ms, r.min_ms, r.max_ms
            ));
            if wall_time {
                out.push_str(&format!(",{:.3}", r.wall_ms));
            }
            out.push('\n');
        }
        out
    }

    /// Mean time strictly increasing in node count at each size and in
    /// size at each node count. Returns the violations.
    pub fn monotonicity_violations(&self) -> Vec<String> {
        let mut bad = Vec::new();
        let mut nodes: Vec<usize> = self.rows.iter().map(|r| r.nodes).collect();
        let mut sizes: Vec<usize> = self.rows.iter().map(|r| r.size_bytes).collect();
        nodes.sort_unstable();
        nodes.dedup();
        sizes.sort_unstable();
        sizes.dedup();
        for &s in &sizes {
            for w in nodes.windows(2) {
                if let (Some(a), Some(b)) = (self.row(w[0], s), self.row(w[1], s)) {
                    if b.mean_ms <= a.mean_ms {
                        bad.push(format!("size {s}: N={} mean {:.1} >= N={} mean {:.1}", w[0], a.mean_ms, w[1], b.mean_ms));
                    }
                }
            }
        }
        for &n in &nodes {
            for w in sizes.windows(2) {
                if let (Some(a), Some(b)) = (self.row(n, w[0]), self.row(n, w[1])) {
                    if b.mean_ms <= a.mean_ms {
                        bad.push(format!("N={n}: {} B mean {:.1} >= {} B mean {:.1}", w[0], a.mean_ms, w[1], b.mean_ms));
                    }
                }
            }
        }
        bad
    }
}

pub fn median(sorted: &[u64]) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        sorted[n / 2] as f64
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0
    }
}

/// Finalization time of `requests` sequential add requests, each waiting
/// for the store to go quiet plus a random pause below one block before the
/// next. The pause and payload streams are the same for every point.
pub fn oracle_point(nodes: usize, size: usize, requests: usize, seed: u64) -> Result<OracleRow, HarnessError> {
    let cfg = SimConfig {
        node_faults: vec![FaultMode::Honest; nodes],
        oracle_deadline_ms: ORACLE_DEADLINE_MS,
        ..SimConfig::default()
    };
    let wall = Instant::now();
    let mut sim = Simulation::new(&cfg)?;
    let client = sim.actor("helene/bench/client")?.id;
    let mut pauses = seeded_rng(seed, "bench/oracle/pause");
    let mut payloads = seeded_rng(seed, "bench/oracle/payload");
    let mut payload = vec![0u8; size];
    let mut times = Vec::with_capacity(requests);
    for _ in 0..requests {
        sim.run_for(pauses.gen_range(0..cfg.block_interval_ms))?;
        payloads.fill_bytes(&mut payload);
        let t0 = sim.now();
        let h = sim.submit(
            client,
            OracleCall::TriggerAdd {
                ciphertext: B64.encode(&payload),
                retriever: client,
            },
        )?;
        let id = sim
            .wait_receipt(&h, ORACLE_DEADLINE_MS)?
            .id()
            .ok_or_else(|| HarnessError::Check("trigger_add returned no id".into()))?;
        sim.run_until(2 * ORACLE_DEADLINE_MS, |s| {
            s.platform().oracle.request(id).is_ok_and(|r| r.status != RequestStatus::Pending)
        })?;
        let req = sim.platform().oracle.request(id).expect("exists");
        if req.status != RequestStatus::Finalized {
            return Err(HarnessError::Check(format!("request {id} failed with {nodes} honest nodes")));
        }
        times.push(req.resolved_at.expect("resolved") - t0);
        sim.run_until(2 * ORACLE_DEADLINE_MS, |s| s.storage().is_quiet())?;
    }
    let mean = times.iter().sum::<u64>() as f64 / times.len().max(1) as f64;
    times.sort_unstable();
    Ok(OracleRow {
        nodes,
        size_bytes: size,
        requests,
        mean_ms: mean,
        median_ms: median(&times),
        min_ms: times.first().copied().unwrap_or(0),
        max_ms: times.last().copied().unwrap_or(0),
        wall_ms: wall.elapsed().as_secs_f64() * 1e3,
    })
}

pub fn oracle(node_counts: &[usize], sizes: &[usize], requests: usize, seed: u64) -> Result<OracleReport, HarnessError> {
    let mut rows = Vec::new();
    for &n in node_counts {
        for &s in sizes {
            rows.push(oracle_point(n, s, requests, seed)?);
        }
    }
    Ok(OracleReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_beats_sequential() {
        let r = batch(BATCH_LEGS).unwrap();
        assert_eq!(r.row("sequential").transactions, 100);
        assert_eq!(r.row("batch").transactions, 1);
        // One block per receipt-waiting transfer against one block in total.
        assert_eq!(r.row("sequential").virtual_ms, 100_000);
        assert_eq!(r.row("batch").virtual_ms, 1_000);
        assert_eq!(r.balances.values().filter(|&&b| b > 0).count(), 101);
    }

    #[test]
    fn single_leg_is_one_tx_each() {
        let r = batch(1).unwrap();
        assert_eq!(r.row("sequential").transactions, 1);
        assert_eq!(r.row("batch").transactions, 1);
    }

    #[test]
    fn csv_has_no_wall_column_by_default() {
        let r = batch(3).unwrap();
        let csv = r.to_csv(false);
        assert!(csv.starts_with("mode,legs,transactions,virtual_ms\n"));
        assert_eq!(csv, batch(3).unwrap().to_csv(false));
        assert!(r.to_csv(true).lines().next().unwrap().ends_with(",wall_ms"));
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[]), 0.0);
        assert_eq!(median(&[3]), 3.0);
        assert_eq!(median(&[1, 2, 4, 9]), 3.0);
    }

    #[test]
    fn small_oracle_campaign_is_ordered() {
        let r = oracle(&ORACLE_NODE_COUNTS, &ORACLE_PAYLOAD_SIZES, 10, 1).unwrap();
        assert!(r.monotonicity_violations().is_empty(), "{:?}", r.monotonicity_violations());
        assert_eq!(r.to_csv(false), oracle(&ORACLE_NODE_COUNTS, &ORACLE_PAYLOAD_SIZES, 10, 1).unwrap().to_csv(false));
    }
}
