//! Lab test machine simulator: antibody sampling from an empirical
//! histogram, diagnostic classification, sealed report production and an
//! automated lab agent that bids on auctions and fulfils the ones it wins.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use ed25519_dalek::{SigningKey, VerifyingKey};
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fortuna::{Fortuna, FortunaError};
use crate::ledger::AccountId;
use crate::marketplace::{AuctionId, AuctionState, MarketCall, Preferences};
use crate::oracle::{OracleCall, RequestKind, RequestStatus};
use crate::platform::{Platform, PlatformCall};
use crate::sealing::{self, account_of, SealError};
use crate::types::{Diagnostic, TestType};

pub const DEFAULT_DISTRIBUTION_PATH: &str = "data/antibody_distribution.csv";

/// Copy of the default distribution compiled into the binary.
pub const BUNDLED_DISTRIBUTION: &str = include_str!("../../../data/antibody_distribution.csv");

#[derive(Debug, Error)]
pub enum LabError {
    #[error("cannot read distribution: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed distribution: {0}")]
    Csv(#[from] csv::Error),
    #[error("distribution has no bins")]
    Empty,
    #[error("bin {0} has edge_high <= edge_low")]
    NonMonotone(usize),
    #[error("bin {0} does not start where the previous one ends")]
    NotContiguous(usize),
    #[error("bin {0} has a negative edge or count")]
    Negative(usize),
    #[error("bin {0} has a count but contains no integer value")]
    NoIntegerInBin(usize),
    #[error("all bin counts are zero")]
    ZeroTotal,
    #[error("invalid policy: {0}")]
    Policy(String),
    #[error(transparent)]
    Seal(#[from] SealError),
    #[error(transparent)]
    Fortuna(#[from] FortunaError),
    #[error("report field {0} is missing or malformed")]
    ReportField(&'static str),
}

#[derive(Debug, Deserialize)]
struct Row {
    edge_low: f64,
    edge_high: f64,
    count: i64,
}

/// Histogram with `k + 1` contiguous edges and `k` counts.
#[derive(Debug, Clone, PartialEq)]
pub struct AntibodyDistribution {
    edges: Vec<f64>,
    counts: Vec<u64>,
    total: u64,
}

impl AntibodyDistribution {
    pub fn new(edges: Vec<f64>, counts: Vec<u64>) -> Result<Self, LabError> {
        if counts.is_empty() || edges.len() != counts.len() + 1 {
            return Err(LabError::Empty);
        }
        for (i, w) in edges.windows(2).enumerate() {
            if !(w[0] >= 0.0 && w[0].is_finite() && w[1].is_finite()) {
                return Err(LabError::Negative(i));
            }
            if w[1] <= w[0] {
                return Err(LabError::NonMonotone(i));
            }
            if counts[i] > 0 && w[0].ceil() >= w[1] {
                return Err(LabError::NoIntegerInBin(i));
            }
        }
        let total = counts.iter().sum();
        if total == 0 {
            return Err(LabError::ZeroTotal);
        }
        Ok(AntibodyDistribution { edges, counts, total })
    }

    /// CSV with header `edge_low,edge_high,count`; `#` starts a comment line.
    pub fn from_csv(text: &str) -> Result<Self, LabError> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut edges = Vec::new();
        let mut counts = Vec::new();
        for (i, row) in reader.deserialize::<Row>().enumerate() {
            let row = row?;
            if row.count < 0 || row.edge_low < 0.0 {
                return Err(LabError::Negative(i));
            }
            match edges.last() {
                None => edges.push(row.edge_low),
                Some(&prev) if prev != row.edge_low => return Err(LabError::NotContiguous(i)),
                Some(_) => {}
            }
            if row.edge_high <= row.edge_low {
                return Err(LabError::NonMonotone(i));
            }
            edges.push(row.edge_high);
            counts.push(row.count as u64);
        }
        Self::new(edges, counts)
    }

    pub fn bundled() -> Self {
        Self::from_csv(BUNDLED_DISTRIBUTION).expect("bundled distribution is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LabError> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn probability(&self, bin: usize) -> f64 {
        self.counts[bin] as f64 / self.total as f64
    }

    /// Integer values `lo..hi` covered by bin `i`.
    pub fn support(&self, bin: usize) -> (u64, u64) {
        (self.edges[bin].ceil() as u64, self.edges[bin + 1].ceil() as u64)
    }

    pub fn bin_of(&self, value: u64) -> Option<usize> {
        let v = value as f64;
        (0..self.bins()).find(|&i| self.edges[i] <= v && v < self.edges[i + 1])
    }

    /// Picks a bin with probability `count / total`, then a uniform integer
    /// inside it.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let mut r = rng.gen_range(0..self.total);
        let bin = self
            .counts
            .iter()
            .position(|&c| {
                if r < c {
                    true
                } else {
                    r -= c;
                    false
                }
            })
            .expect("r < total");
        let (lo, hi) = self.support(bin);
        rng.gen_range(lo..hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thresholds {
    pub negative_max: u64,
    pub inconclusive_max: u64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            negative_max: 100,
            inconclusive_max: 200,
        }
    }
}

impl Thresholds {
    pub fn classify(&self, count: u64) -> Diagnostic {
        if count <= self.negative_max {
            Diagnostic::Negative
        } else if count <= self.inconclusive_max {
            Diagnostic::Inconclusive
        } else {
            Diagnostic::Positive
        }
    }
}

/// `<=100` negative, `101..=200` inconclusive, above that positive.
pub fn classify(count: u64) -> Diagnostic {
    Thresholds::default().classify(count)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestReport {
    pub test_id: String,
    pub antibody_gmfi: u64,
    pub diagnostic: Diagnostic,
    pub lab_id: AccountId,
    pub timestamp_ms: u64,
}

impl TestReport {
    pub fn canonical_bytes(&self) -> Result<Vec<u8>, SealError> {
        sealing::canonicalize([
            ("antibody_gmfi", self.antibody_gmfi.to_string()),
            ("diagnostic", self.diagnostic.to_string()),
            ("lab_id", self.lab_id.to_hex()),
            ("test_id", self.test_id.clone()),
            ("timestamp_ms", self.timestamp_ms.to_string()),
        ])
    }

    pub fn from_canonical(bytes: &[u8]) -> Result<Self, LabError> {
        let f = sealing::parse_report(bytes)?;
        let get = |k: &'static str| f.get(k).ok_or(LabError::ReportField(k));
        Ok(TestReport {
            test_id: get("test_id")?.clone(),
            antibody_gmfi: get("antibody_gmfi")?.parse().map_err(|_| LabError::ReportField("antibody_gmfi"))?,
            diagnostic: get("diagnostic")?.parse().map_err(|_| LabError::ReportField("diagnostic"))?,
            lab_id: AccountId::from_hex(get("lab_id")?).ok_or(LabError::ReportField("lab_id"))?,
            timestamp_ms: get("timestamp_ms")?.parse().map_err(|_| LabError::ReportField("timestamp_ms"))?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProducedReport {
    pub report: TestReport,
    pub envelope: Vec<u8>,
    pub password: String,
}

impl ProducedReport {
    pub fn envelope_base64(&self) -> String {
        sealing::envelope_to_base64(&self.envelope)
    }
}

/// Sample, classify, canonicalize, sign and seal under a fresh password.
pub fn produce_report<R: Rng + ?Sized>(
    lab: &SigningKey,
    test_id: &str,
    dist: &AntibodyDistribution,
    rng: &mut R,
    fortuna: &mut Fortuna,
    now_ms: u64,
) -> Result<ProducedReport, LabError> {
    let gmfi = dist.sample(rng);
    let report = TestReport {
        test_id: test_id.to_string(),
        antibody_gmfi: gmfi,
        diagnostic: classify(gmfi),
        lab_id: account_of(&lab.verifying_key()),
        timestamp_ms: now_ms,
    };
    let bytes = report.canonical_bytes()?;
    let signature = sealing::sign_report(lab, &bytes);
    let password = fortuna.random_password()?;
    let envelope = sealing::seal(&password, &bytes, &signature, fortuna)?;
    Ok(ProducedReport {
        report,
        envelope,
        password,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfferorPolicy {
    pub price_min: u64,
    pub price_max: u64,
    pub delivery_days_min: u32,
    pub delivery_days_max: u32,
    pub accuracy_pct: u8,
    pub test_types: BTreeSet<TestType>,
}

impl Default for OfferorPolicy {
    fn default() -> Self {
        OfferorPolicy {
            price_min: 20,
            price_max: 60,
            delivery_days_min: 1,
            delivery_days_max: 5,
            accuracy_pct: 95,
            test_types: TestType::ALL.into_iter().collect(),
        }
    }
}

impl OfferorPolicy {
    pub fn validate(&self) -> Result<(), LabError> {
        if self.price_min > self.price_max {
            return Err(LabError::Policy("price_min > price_max".into()));
        }
        if self.delivery_days_min == 0 || self.delivery_days_min > self.delivery_days_max {
            return Err(LabError::Policy("delivery days range must be 1 <= min <= max".into()));
        }
        if self.accuracy_pct > 100 {
            return Err(LabError::Policy("accuracy_pct above 100".into()));
        }
        Ok(())
    }
}

/// Automated lab. Each call to [`Offeror::step`] looks at committed state
/// and returns the transactions the lab wants to send; it never sends the
/// same step for an auction twice.
pub struct Offeror {
    key: SigningKey,
    id: AccountId,
    policy: OfferorPolicy,
    dist: Arc<AntibodyDistribution>,
    rng: ChaCha20Rng,
    fortuna: Fortuna,
    done: BTreeSet<(AuctionId, AuctionState)>,
    reports: BTreeMap<AuctionId, ProducedReport>,
}

impl Offeror {
    pub fn new(
        key: SigningKey,
        policy: OfferorPolicy,
        dist: Arc<AntibodyDistribution>,
        rng: ChaCha20Rng,
        fortuna: Fortuna,
    ) -> Result<Self, LabError> {
        policy.validate()?;
        Ok(Offeror {
            id: account_of(&key.verifying_key()),
            key,
            policy,
            dist,
            rng,
            fortuna,
            done: BTreeSet::new(),
            reports: BTreeMap::new(),
        })
    }

    pub fn id(&self) -> AccountId {
        self.id
    }

    pub fn verifying_key(&self) -> VerifyingKey {
        self.key.verifying_key()
    }

    pub fn policy(&self) -> &OfferorPolicy {
        &self.policy
    }

    /// Report produced for an auction; the password goes to the patient
    /// off-chain.
    pub fn report(&self, auction: AuctionId) -> Option<&ProducedReport> {
        self.reports.get(&auction)
    }

    fn once(&mut self, auction: AuctionId, state: AuctionState) -> bool {
        self.done.insert((auction, state))
    }

    pub fn step(&mut self, platform: &Platform, now: u64) -> Result<Vec<PlatformCall>, LabError> {
        let mut out = Vec::new();
        let open: Vec<(AuctionId, TestType)> = platform.market.open_auctions(now).map(|a| (a.id, a.test_type)).collect();
        for (id, test_type) in open {
            if self.policy.test_types.contains(&test_type) && self.once(id, AuctionState::Bidding) {
                let terms = Preferences {
                    accuracy_pct: self.policy.accuracy_pct,
                    delivery_days: self
                        .rng
                        .gen_range(self.policy.delivery_days_min..=self.policy.delivery_days_max),
                    price: self.rng.gen_range(self.policy.price_min..=self.policy.price_max),
                };
                out.push(MarketCall::PlaceBid { auction_id: id, terms }.into());
            }
        }
        let mine: Vec<(AuctionId, AuctionState, AccountId)> = platform
            .market
            .auctions()
            .values()
            .filter(|a| a.winner.is_some_and(|w| w.lab == self.id))
            .map(|a| (a.id, a.state, a.patient))
            .collect();
        for (id, state, patient) in mine {
            let auction_id = id;
            match state {
                AuctionState::Selected if self.once(id, state) => {
                    out.push(MarketCall::ConfirmRequest { auction_id }.into());
                }
                AuctionState::Paid if self.once(id, state) => {
                    out.push(MarketCall::MarkKitSent { auction_id }.into());
                }
                AuctionState::KitSent if self.once(id, state) => {
                    out.push(MarketCall::MarkSampleReceived { auction_id }.into());
                }
                AuctionState::SampleReceived => {
                    if let Some(produced) = self.reports.get(&id) {
                        let b64 = produced.envelope_base64();
                        let finalized = platform.oracle.requests().values().find(|r| {
                            r.kind == RequestKind::Add
                                && r.requester == self.id
                                && r.status == RequestStatus::Finalized
                                && r.ciphertext.as_deref() == Some(b64.as_str())
                        });
                        if let Some(r) = finalized {
                            let request_id = r.id;
                            if self.once(id, state) {
                                out.push(MarketCall::AttachResult { auction_id, request_id }.into());
                            }
                        }
                    } else {
                        let produced = produce_report(
                            &self.key,
                            &format!("T-{id:06}"),
                            &self.dist,
                            &mut self.rng,
                            &mut self.fortuna,
                            now,
                        )?;
                        out.push(
                            OracleCall::TriggerAdd {
                                ciphertext: produced.envelope_base64(),
                                retriever: patient,
                            }
                            .into(),
                        );
                        self.reports.insert(id, produced);
                    }
                }
                _ => {}
            }
        }
        Ok(out)
    }
}
