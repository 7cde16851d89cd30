//! NIST SP 800-22 campaign over Fortuna output.
//!
//! A run passes when every test with at least one evaluation reaches both
//! the confidence-interval bound and [`PROPORTION_FLOOR`], and the median
//! proportion reaches [`MEDIAN_FLOOR`]. The criterion is statistical, so a
//! failing run is repeated once with [`RERUN_SEED`].

use std::fs;
use std::path::Path;

use crate::nist::{run_suite, BitSequence, NistParams, SuiteReport};

use super::{seeded_fortuna, HarnessError};

pub const DEFAULT_SEQUENCES: usize = 50;
pub const DEFAULT_BITS: usize = 1_000_000;
pub const DEFAULT_SEED: u64 = 20_240_601;
pub const RERUN_SEED: u64 = 20_240_602;
pub const PROPORTION_FLOOR: f64 = 0.94;
pub const MEDIAN_FLOOR: f64 = 0.98;

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub pass: bool,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignRun {
    pub seed: u64,
    pub report: SuiteReport,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Campaign {
    /// The first run, followed by the rerun if the first failed.
    pub runs: Vec<CampaignRun>,
}

impl Campaign {
    pub fn last(&self) -> &CampaignRun {
        self.runs.last().expect("at least one run")
    }

    pub fn pass(&self) -> bool {
        self.last().verdict.pass
    }
}

/// `sequences` independent streams of `bits` bits from a Fortuna instance
/// keyed by `seed`.
pub fn generate(seed: u64, sequences: usize, bits: usize) -> Result<Vec<BitSequence>, HarnessError> {
    let mut f = seeded_fortuna(seed, "nist/campaign");
    let mut buf = vec![0u8; bits.div_ceil(8)];
    (0..sequences)
        .map(|_| {
            f.fill(&mut buf)?;
            Ok(BitSequence::from_bytes(&buf)
                .map_err(|e| HarnessError::Check(e.to_string()))?
                .truncated(bits))
        })
        .collect()
}

pub fn evaluate(report: &SuiteReport) -> Verdict {
    let mut failures = Vec::new();
    for r in report.rows.iter().filter(|r| r.evaluations > 0) {
        if r.proportion < r.threshold {
            failures.push(format!(
                "{}: proportion {:.4} below bound {:.4}",
                r.test.name(),
                r.proportion,
                r.threshold
            ));
        }
        if r.proportion < PROPORTION_FLOOR {
            failures.push(format!("{}: proportion {:.4} below {PROPORTION_FLOOR}", r.test.name(), r.proportion));
        }
    }
    let median = report.median_proportion();
    if median < MEDIAN_FLOOR {
        failures.push(format!("median proportion {median:.4} below {MEDIAN_FLOOR}"));
    }
    Verdict {
        pass: failures.is_empty(),
        failures,
    }
}

pub fn run_once(seed: u64, sequences: usize, bits: usize, params: &NistParams) -> Result<CampaignRun, HarnessError> {
    let seqs = generate(seed, sequences, bits)?;
    let report = run_suite(&seqs, params);
    let verdict = evaluate(&report);
    Ok(CampaignRun { seed, report, verdict })
}

pub fn run(seed: u64, sequences: usize, bits: usize, params: &NistParams) -> Result<Campaign, HarnessError> {
    let first = run_once(seed, sequences, bits, params)?;
    let mut runs = vec![first];
    if !runs[0].verdict.pass {
        let rerun = if seed == RERUN_SEED { DEFAULT_SEED } else { RERUN_SEED };
        runs.push(run_once(rerun, sequences, bits, params)?);
    }
    Ok(Campaign { runs })
}

/// Reads every regular file of `dir` in name order. Files made only of
/// `0`, `1` and whitespace are read as ASCII bits, anything else as raw
/// bytes. With `bits` set, longer sequences are cut to that length.
pub fn load_dir(dir: impl AsRef<Path>, bits: Option<usize>) -> Result<Vec<BitSequence>, HarnessError> {
    let mut paths: Vec<_> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    paths.retain(|p| p.is_file());
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        let data = fs::read(&p)?;
        let ascii = !data.is_empty() && data.iter().all(|b| matches!(b, b'0' | b'1' | b' ' | b'\n' | b'\r' | b'\t'));
        let seq = if ascii {
            let text: String = data.iter().filter(|b| matches!(b, b'0' | b'1')).map(|&b| b as char).collect();
            BitSequence::from_ascii(&text)
        } else {
            BitSequence::from_bytes(&data)
        }
        .map_err(|e| HarnessError::Check(format!("{}: {e}", p.display())))?;
        out.push(match bits {
            Some(n) => seq.truncated(n),
            None => seq,
        });
    }
    if out.is_empty() {
        return Err(HarnessError::Check("no input files".into()));
    }
    Ok(out)
}
