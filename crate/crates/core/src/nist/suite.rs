use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_test_on_bits, BitSequence, NistError, NistParams, TestId, TestOutcome};

/// Lower bound of the acceptable pass proportion for `m` sequences at
/// significance `alpha`: `(1 - a) - 3 sqrt(a (1 - a) / m)`, clamped at 0.
pub fn min_pass_proportion(alpha: f64, m: usize) -> f64 {
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must be in (0, 1)");
    assert!(m >= 1, "need at least one sequence");
    let p = 1.0 - alpha;
    (p - 3.0 * (alpha * p / m as f64).sqrt()).max(0.0)
}

/// One report row.
///
/// Tests that emit several p-values per sequence (templates, serial,
/// excursions) are pooled: `evaluations` counts every p-value, and the
/// proportion is the share of them at or above alpha. For single-p-value
/// tests evaluations and applicable sequences coincide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub test: TestId,
    pub sequences: usize,
    pub sequences_passed: usize,
    pub evaluations: usize,
    pub evaluations_passed: usize,
    pub proportion: f64,
    pub threshold: f64,
}

impl SuiteRow {
    pub fn verdict(&self) -> bool {
        self.evaluations > 0 && self.proportion >= self.threshold
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub sequences: usize,
    pub bits: usize,
    pub alpha: f64,
    pub rows: Vec<SuiteRow>,
}

impl SuiteReport {
    pub fn row(&self, test: TestId) -> Option<&SuiteRow> {
        self.rows.iter().find(|r| r.test == test)
    }

    /// Median pass proportion over rows with at least one evaluation.
    pub fn median_proportion(&self) -> f64 {
        let mut p: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.evaluations > 0)
            .map(|r| r.proportion)
            .collect();
        if p.is_empty() {
            return 0.0;
        }
        p.sort_by(f64::total_cmp);
        let mid = p.len() / 2;
        if p.len().is_multiple_of(2) {
            (p[mid - 1] + p[mid]) / 2.0
        } else {
            p[mid]
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("test,applicable,passed,proportion,threshold,verdict\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:.6},{:.6},{}\n",
                r.test.name(),
                r.evaluations,
                r.evaluations_passed,
                r.proportion,
                r.threshold,
                if r.verdict() { "PASS" } else { "FAIL" }
            ));
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!(
            "NIST SP 800-22: {} sequences x {} bits, alpha = {}\n\n\
             | Test | Sequences | Passed / Evaluated | Accuracy Rate | Threshold | Verdict |\n\
             |---|---|---|---|---|---|\n",
            self.sequences, self.bits, self.alpha
        );
        for r in &self.rows {
            out.push_str(&format!(
                "| {} | {} | {}/{} | {:.2}% | {:.2}% | {} |\n",
                r.test.name(),
                r.sequences,
                r.evaluations_passed,
                r.evaluations,
                100.0 * r.proportion,
                100.0 * r.threshold,
                if r.verdict() { "PASS" } else { "FAIL" }
            ));
        }
        out
    }
}

/// Runs every test on every sequence and aggregates pass proportions.
/// Sequences fan out across the rayon pool; results merge in input order.
pub fn run_suite(sequences: &[BitSequence], params: &NistParams) -> SuiteReport {
    assert!(!sequences.is_empty(), "run_suite needs at least one sequence");
    let per_sequence: Vec<Vec<Result<TestOutcome, NistError>>> = sequences
        .par_iter()
        .map(|s| {
            let bits = s.unpack();
            TestId::ALL
                .iter()
                .map(|&t| run_test_on_bits(t, &bits, params))
                .collect()
        })
        .collect();

    let rows = TestId::ALL
        .iter()
        .enumerate()
        .map(|(i, &test)| {
            let outcomes: Vec<&TestOutcome> = per_sequence
                .iter()
                .filter_map(|results| results[i].as_ref().ok())
                .collect();
            let sequences = outcomes.len();
            let sequences_passed = outcomes.iter().filter(|o| o.passed).count();
            let evaluations: usize = outcomes.iter().map(|o| o.p_values.len()).sum();
            let evaluations_passed: usize =
                outcomes.iter().map(|o| o.passed_count(params.alpha)).sum();
            SuiteRow {
                test,
                sequences,
                sequences_passed,
                evaluations,
                evaluations_passed,
                proportion: if evaluations == 0 {
                    0.0
                } else {
                    evaluations_passed as f64 / evaluations as f64
                },
                threshold: min_pass_proportion(params.alpha, sequences.max(1)),
            }
        })
        .collect();

    SuiteReport {
        sequences: sequences.len(),
        bits: sequences.iter().map(BitSequence::len).max().unwrap_or(0),
        alpha: params.alpha,
        rows,
    }
}
