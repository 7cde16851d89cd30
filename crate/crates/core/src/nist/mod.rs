//! NIST SP 800-22 statistical test suite.
//!
//! All sixteen report rows are implemented: Cumulative Sums is split into
//! its forward and backward modes so each gets its own row. Tests take an
//! unpacked bit slice internally; [`run_test`] and [`run_suite`] accept a
//! packed [`BitSequence`].

mod bits;
mod complexity;
mod frequency;
mod matrix;
mod serial;
mod special;
mod spectral;
mod suite;
mod templates;
mod walks;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bits::{bits_from_bytes, BitSequence};
pub use complexity::berlekamp_massey;
pub use suite::{min_pass_proportion, run_suite, SuiteReport, SuiteRow};
pub use templates::aperiodic_templates;
pub use walks::MIN_EXCURSION_CYCLES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TestId {
    Frequency,
    BlockFrequency,
    Runs,
    LongestRunOfOnes,
    BinaryMatrixRank,
    DiscreteFourierTransform,
    NonOverlappingTemplate,
    OverlappingTemplate,
    Universal,
    LinearComplexity,
    Serial,
    ApproximateEntropy,
    CumulativeSumsForward,
    CumulativeSumsBackward,
    RandomExcursions,
    RandomExcursionsVariant,
}

impl TestId {
    pub const ALL: [TestId; 16] = [
        TestId::Frequency,
        TestId::BlockFrequency,
        TestId::Runs,
        TestId::LongestRunOfOnes,
        TestId::BinaryMatrixRank,
        TestId::DiscreteFourierTransform,
        TestId::NonOverlappingTemplate,
        TestId::OverlappingTemplate,
        TestId::Universal,
        TestId::LinearComplexity,
        TestId::Serial,
        TestId::ApproximateEntropy,
        TestId::CumulativeSumsForward,
        TestId::CumulativeSumsBackward,
        TestId::RandomExcursions,
        TestId::RandomExcursionsVariant,
    ];

    /// Report row label.
    pub fn name(self) -> &'static str {
        match self {
            TestId::Frequency => "Frequency",
            TestId::BlockFrequency => "Block Frequency",
            TestId::Runs => "Runs",
            TestId::LongestRunOfOnes => "Longest Run of Ones",
            TestId::BinaryMatrixRank => "Binary Matrix Rank",
            TestId::DiscreteFourierTransform => "Discrete Fourier Transform",
            TestId::NonOverlappingTemplate => "Non-overlapping Template Matching",
            TestId::OverlappingTemplate => "Overlapping Template Matching",
            TestId::Universal => "Maurer's Universal Statistical",
            TestId::LinearComplexity => "Linear Complexity",
            TestId::Serial => "Serial",
            TestId::ApproximateEntropy => "Approximate Entropy",
            TestId::CumulativeSumsForward => "Cumulative Sums (Forward)",
            TestId::CumulativeSumsBackward => "Cumulative Sums (Backward)",
            TestId::RandomExcursions => "Random Excursions",
            TestId::RandomExcursionsVariant => "Random Excursions Variant",
        }
    }
}

impl std::fmt::Display for TestId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NistError {
    #[error("bit sequence input is empty")]
    EmptyInput,
    #[error("invalid bit character {0:?}")]
    InvalidDigit(char),
    #[error("{test}: needs at least {needed} bits, got {got}")]
    TooShort {
        test: TestId,
        needed: usize,
        got: usize,
    },
    #[error("{test}: not applicable ({cycles} cycles < 500)")]
    NotApplicable { test: TestId, cycles: usize },
}

impl NistError {
    pub(crate) fn too_short(test: TestId, needed: usize, got: usize) -> Self {
        NistError::TooShort { test, needed, got }
    }
}

/// Per-test parameters. Defaults are the reference-suite settings for
/// one-million-bit sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NistParams {
    pub alpha: f64,
    pub block_frequency_m: usize,
    pub non_overlapping_m: usize,
    pub overlapping_m: usize,
    pub overlapping_block: usize,
    pub universal_l: usize,
    pub universal_q: usize,
    pub linear_complexity_m: usize,
    pub serial_m: usize,
    pub approximate_entropy_m: usize,
    pub dft_threshold: f64,
}

impl Default for NistParams {
    fn default() -> Self {
        NistParams {
            alpha: 0.01,
            block_frequency_m: 128,
            non_overlapping_m: 9,
            overlapping_m: 9,
            overlapping_block: 1032,
            universal_l: 7,
            universal_q: 1280,
            linear_complexity_m: 500,
            serial_m: 16,
            approximate_entropy_m: 10,
            dft_threshold: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub test: TestId,
    pub p_values: Vec<f64>,
    /// True iff every p-value is at least alpha.
    pub passed: bool,
}

impl TestOutcome {
    fn new(test: TestId, p_values: Vec<f64>, alpha: f64) -> Self {
        debug_assert!(p_values.iter().all(|p| p.is_finite() && (0.0..=1.0).contains(p)));
        let passed = p_values.iter().all(|&p| p >= alpha);
        TestOutcome {
            test,
            p_values,
            passed,
        }
    }

    pub fn passed_count(&self, alpha: f64) -> usize {
        self.p_values.iter().filter(|&&p| p >= alpha).count()
    }
}

pub(crate) fn run_test_on_bits(
    test: TestId,
    bits: &[u8],
    params: &NistParams,
) -> Result<TestOutcome, NistError> {
    let p_values = match test {
        TestId::Frequency => frequency::frequency(bits),
        TestId::BlockFrequency => frequency::block_frequency(bits, params.block_frequency_m),
        TestId::Runs => frequency::runs(bits),
        TestId::LongestRunOfOnes => frequency::longest_run_of_ones(bits),
        TestId::BinaryMatrixRank => matrix::binary_matrix_rank(bits),
        TestId::DiscreteFourierTransform => spectral::dft(bits, params.dft_threshold),
        TestId::NonOverlappingTemplate => {
            templates::non_overlapping_template(bits, params.non_overlapping_m)
        }
        TestId::OverlappingTemplate => {
            templates::overlapping_template(bits, params.overlapping_m, params.overlapping_block)
        }
        TestId::Universal => complexity::universal(bits, params.universal_l, params.universal_q),
        TestId::LinearComplexity => complexity::linear_complexity(bits, params.linear_complexity_m),
        TestId::Serial => serial::serial(bits, params.serial_m),
        TestId::ApproximateEntropy => serial::approximate_entropy(bits, params.approximate_entropy_m),
        TestId::CumulativeSumsForward => walks::cumulative_sums(bits, true),
        TestId::CumulativeSumsBackward => walks::cumulative_sums(bits, false),
        TestId::RandomExcursions => walks::random_excursions(bits),
        TestId::RandomExcursionsVariant => walks::random_excursions_variant(bits),
    }?;
    Ok(TestOutcome::new(test, p_values, params.alpha))
}

/// Runs one test on one sequence.
pub fn run_test(
    test: TestId,
    sequence: &BitSequence,
    params: &NistParams,
) -> Result<TestOutcome, NistError> {
    run_test_on_bits(test, &sequence.unpack(), params)
}
