//! Non-overlapping and overlapping template matching tests.

use statrs::function::gamma::ln_gamma;

use super::special::{chi_square, igamc};
use super::{NistError, TestId};

const NON_OVERLAPPING_BLOCKS: usize = 8;
const OVERLAPPING_CLASSES: usize = 5;
/// Class probabilities for m = 9, M = 1032 (corrected values used by the
/// reference suite).
const OVERLAPPING_PI_M9: [f64; 6] = [0.364091, 0.185659, 0.139381, 0.100571, 0.0704323, 0.139865];

/// All `m`-bit templates with no proper prefix equal to a suffix, in
/// ascending numeric order.
pub fn aperiodic_templates(m: usize) -> Vec<u32> {
    assert!((2..=21).contains(&m), "template length {m} unsupported");
    (0u32..(1 << m))
        .filter(|&t| {
            (1..m).all(|shift| {
                let overlap = m - shift;
                let prefix = t >> shift;
                let suffix = t & ((1u32 << overlap) - 1);
                prefix != suffix
            })
        })
        .collect()
}

/// `out[i]` is the `m`-bit value starting at bit `i` (MSB = bit `i`).
fn window_values(bits: &[u8], m: usize) -> Vec<u32> {
    if bits.len() < m {
        return Vec::new();
    }
    let mask = (1u32 << m) - 1;
    let mut out = Vec::with_capacity(bits.len() - m + 1);
    let mut acc = 0u32;
    for (i, &b) in bits.iter().enumerate() {
        acc = ((acc << 1) | b as u32) & mask;
        if i + 1 >= m {
            out.push(acc);
        }
    }
    out
}

pub(crate) fn non_overlapping_template(bits: &[u8], m: usize) -> Result<Vec<f64>, NistError> {
    let n = bits.len();
    let block = n / NON_OVERLAPPING_BLOCKS;
    if !(2..=21).contains(&m) || block < m {
        return Err(NistError::too_short(
            TestId::NonOverlappingTemplate,
            NON_OVERLAPPING_BLOCKS * m.max(2),
            n,
        ));
    }
    let windows = window_values(bits, m);
    let two_m = 2f64.powi(m as i32);
    let lambda = (block - m + 1) as f64 / two_m;
    let variance = block as f64 * (1.0 / two_m - (2.0 * m as f64 - 1.0) / two_m.powi(2));
    let positions = block - m + 1;

    let p_values = aperiodic_templates(m)
        .into_iter()
        .map(|template| {
            let chi2: f64 = (0..NON_OVERLAPPING_BLOCKS)
                .map(|i| {
                    let w = &windows[i * block..i * block + positions];
                    let mut count = 0u32;
                    let mut j = 0;
                    while j < positions {
                        if w[j] == template {
                            count += 1;
                            j += m;
                        } else {
                            j += 1;
                        }
                    }
                    (count as f64 - lambda).powi(2) / variance
                })
                .sum();
            igamc(NON_OVERLAPPING_BLOCKS as f64 / 2.0, chi2 / 2.0)
        })
        .collect();
    Ok(p_values)
}

fn overlapping_class_probability(u: usize, eta: f64) -> f64 {
    if u == 0 {
        return (-eta).exp();
    }
    let uf = u as f64;
    (1..=u)
        .map(|l| {
            let lf = l as f64;
            (-eta - uf * std::f64::consts::LN_2 + lf * eta.ln() - ln_gamma(lf + 1.0)
                + ln_gamma(uf)
                - ln_gamma(lf)
                - ln_gamma(uf - lf + 1.0))
            .exp()
        })
        .sum()
}

pub(crate) fn overlapping_class_probabilities(m: usize, block: usize) -> Vec<f64> {
    if m == 9 && block == 1032 {
        return OVERLAPPING_PI_M9.to_vec();
    }
    let lambda = (block - m + 1) as f64 / 2f64.powi(m as i32);
    let eta = lambda / 2.0;
    let mut pi: Vec<f64> = (0..OVERLAPPING_CLASSES)
        .map(|u| overlapping_class_probability(u, eta))
        .collect();
    pi.push(1.0 - pi.iter().sum::<f64>());
    pi
}

pub(crate) fn overlapping_template(bits: &[u8], m: usize, block: usize) -> Result<Vec<f64>, NistError> {
    let n = bits.len();
    if !(2..=21).contains(&m) || block < m || n < block {
        return Err(NistError::too_short(TestId::OverlappingTemplate, block.max(m), n));
    }
    let blocks = n / block;
    let ones = (1u32 << m) - 1;
    let mut nu = [0u64; OVERLAPPING_CLASSES + 1];
    for chunk in bits.chunks_exact(block).take(blocks) {
        let hits = window_values(chunk, m).into_iter().filter(|&w| w == ones).count();
        nu[hits.min(OVERLAPPING_CLASSES)] += 1;
    }
    let pi = overlapping_class_probabilities(m, block);
    let chi2 = chi_square(&nu, &pi, blocks as f64);
    Ok(vec![igamc(OVERLAPPING_CLASSES as f64 / 2.0, chi2 / 2.0)])
}
