//! Serial and approximate entropy tests (overlapping patterns, cyclic
//! wrap-around).

use super::special::igamc;
use super::{NistError, TestId};

/// Counts of every overlapping `m`-bit pattern, treating the sequence as
/// cyclic (first `m - 1` bits appended).
pub(crate) fn cyclic_pattern_counts(bits: &[u8], m: usize) -> Vec<u64> {
    let mut counts = vec![0u64; 1 << m];
    if m == 0 {
        counts[0] = bits.len() as u64;
        return counts;
    }
    let n = bits.len();
    let mask = (1usize << m) - 1;
    let mut acc = 0usize;
    for &b in &bits[..m - 1] {
        acc = (acc << 1) | b as usize;
    }
    for i in 0..n {
        acc = ((acc << 1) | bits[(i + m - 1) % n] as usize) & mask;
        counts[acc] += 1;
    }
    counts
}

fn psi_squared(bits: &[u8], m: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let n = bits.len() as f64;
    let sum: f64 = cyclic_pattern_counts(bits, m)
        .iter()
        .map(|&c| (c as f64).powi(2))
        .sum();
    sum * 2f64.powi(m as i32) / n - n
}

pub(crate) fn serial(bits: &[u8], m: usize) -> Result<Vec<f64>, NistError> {
    let n = bits.len();
    if !(2..=24).contains(&m) || n < m {
        return Err(NistError::too_short(TestId::Serial, m.max(2), n));
    }
    let psi_m = psi_squared(bits, m);
    let psi_m1 = psi_squared(bits, m - 1);
    let psi_m2 = psi_squared(bits, m - 2);
    let del1 = psi_m - psi_m1;
    let del2 = psi_m - 2.0 * psi_m1 + psi_m2;
    Ok(vec![
        igamc(2f64.powi(m as i32 - 2), del1 / 2.0),
        igamc(2f64.powi(m as i32 - 3), del2 / 2.0),
    ])
}

fn phi(bits: &[u8], m: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let n = bits.len() as f64;
    cyclic_pattern_counts(bits, m)
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum()
}

pub(crate) fn approximate_entropy(bits: &[u8], m: usize) -> Result<Vec<f64>, NistError> {
    let n = bits.len();
    if !(1..=24).contains(&m) || n < m + 1 {
        return Err(NistError::too_short(TestId::ApproximateEntropy, m + 1, n));
    }
    let ap_en = phi(bits, m) - phi(bits, m + 1);
    let chi2 = 2.0 * n as f64 * (std::f64::consts::LN_2 - ap_en);
    Ok(vec![igamc(2f64.powi(m as i32 - 1), chi2 / 2.0)])
}
