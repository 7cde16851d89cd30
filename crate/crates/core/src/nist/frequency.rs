//! Frequency, block frequency, runs and longest-run-of-ones tests.

use super::special::{chi_square, erfc, igamc};
use super::{NistError, TestId};

pub(crate) fn frequency(bits: &[u8]) -> Result<Vec<f64>, NistError> {
    let n = bits.len();
    if n == 0 {
        return Err(NistError::too_short(TestId::Frequency, 1, n));
    }
    let ones = bits.iter().filter(|&&b| b == 1).count() as f64;
    let sum = 2.0 * ones - n as f64;
    let s_obs = sum.abs() / (n as f64).sqrt();
    Ok(vec![erfc(s_obs / std::f64::consts::SQRT_2)])
}

pub(crate) fn block_frequency(bits: &[u8], m: usize) -> Result<Vec<f64>, NistError> {
    let n = bits.len();
    if m == 0 || n < m {
        return Err(NistError::too_short(TestId::BlockFrequency, m.max(1), n));
    }
    let blocks = n / m;
    let chi2: f64 = bits
        .chunks_exact(m)
        .take(blocks)
        .map(|block| {
            let pi = block.iter().filter(|&&b| b == 1).count() as f64 / m as f64;
            (pi - 0.5).powi(2)
        })
        .sum::<f64>()
        * 4.0
        * m as f64;
    Ok(vec![igamc(blocks as f64 / 2.0, chi2 / 2.0)])
}

pub(crate) fn runs(bits: &[u8]) -> Result<Vec<f64>, NistError> {
    let n = bits.len();
    if n < 2 {
        return Err(NistError::too_short(TestId::Runs, 2, n));
    }
    let nf = n as f64;
    let pi = bits.iter().filter(|&&b| b == 1).count() as f64 / nf;
    // Frequency prerequisite: a grossly biased sequence fails outright.
    if (pi - 0.5).abs() > 2.0 / nf.sqrt() {
        return Ok(vec![0.0]);
    }
    let v_obs = 1 + bits.windows(2).filter(|w| w[0] != w[1]).count();
    let num = (v_obs as f64 - 2.0 * nf * pi * (1.0 - pi)).abs();
    let den = 2.0 * (2.0 * nf).sqrt() * pi * (1.0 - pi);
    Ok(vec![erfc(num / den)])
}

struct LongestRunTable {
    block: usize,
    /// Longest-run value of the first and last class (inclusive bounds).
    low: usize,
    high: usize,
    pi: &'static [f64],
}

const LONGEST_RUN_SMALL: LongestRunTable = LongestRunTable {
    block: 8,
    low: 1,
    high: 4,
    pi: &[0.2148, 0.3672, 0.2305, 0.1875],
};
const LONGEST_RUN_MEDIUM: LongestRunTable = LongestRunTable {
    block: 128,
    low: 4,
    high: 9,
    pi: &[0.1174, 0.2430, 0.2493, 0.1752, 0.1027, 0.1124],
};
const LONGEST_RUN_LARGE: LongestRunTable = LongestRunTable {
    block: 10_000,
    low: 10,
    high: 16,
    pi: &[0.0882, 0.2092, 0.2483, 0.1933, 0.1208, 0.0675, 0.0727],
};

pub(crate) fn longest_run_of_ones(bits: &[u8]) -> Result<Vec<f64>, NistError> {
    let n = bits.len();
    let table = match n {
        0..=127 => return Err(NistError::too_short(TestId::LongestRunOfOnes, 128, n)),
        128..=6271 => &LONGEST_RUN_SMALL,
        6272..=749_999 => &LONGEST_RUN_MEDIUM,
        _ => &LONGEST_RUN_LARGE,
    };
    let k = table.pi.len() - 1;
    let mut nu = vec![0u64; table.pi.len()];
    let blocks = n / table.block;
    for block in bits.chunks_exact(table.block).take(blocks) {
        let mut longest = 0usize;
        let mut run = 0usize;
        for &b in block {
            if b == 1 {
                run += 1;
                longest = longest.max(run);
            } else {
                run = 0;
            }
        }
        let class = longest.clamp(table.low, table.high) - table.low;
        nu[class] += 1;
    }
    let chi2 = chi_square(&nu, table.pi, blocks as f64);
    Ok(vec![igamc(k as f64 / 2.0, chi2 / 2.0)])
}
