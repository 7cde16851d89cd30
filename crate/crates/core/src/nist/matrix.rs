//! Binary matrix rank test (32 x 32 matrices over GF(2)).

use super::special::{chi_square, igamc};
use super::{NistError, TestId};

const ROWS: usize = 32;
const COLS: usize = 32;

/// Rank over GF(2) of a matrix given as row bitmasks.
pub(crate) fn gf2_rank(rows: &mut [u32]) -> usize {
    let mut rank = 0;
    for col in (0..COLS).rev() {
        let bit = 1u32 << col;
        let Some(pivot) = (rank..rows.len()).find(|&r| rows[r] & bit != 0) else {
            continue;
        };
        rows.swap(rank, pivot);
        let pivot_row = rows[rank];
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && *row & bit != 0 {
                *row ^= pivot_row;
            }
        }
        rank += 1;
    }
    rank
}

/// Probability that a random `m x q` binary matrix has rank `r`.
pub(crate) fn rank_probability(r: usize, m: usize, q: usize) -> f64 {
    let exponent = (r * (q + m - r)) as f64 - (m * q) as f64;
    let mut product = 1.0;
    for i in 0..r {
        let i = i as f64;
        product *= (1.0 - 2f64.powf(i - q as f64)) * (1.0 - 2f64.powf(i - m as f64))
            / (1.0 - 2f64.powf(i - r as f64));
    }
    2f64.powf(exponent) * product
}

pub(crate) fn binary_matrix_rank(bits: &[u8]) -> Result<Vec<f64>, NistError> {
    let per_matrix = ROWS * COLS;
    let n = bits.len();
    let matrices = n / per_matrix;
    if matrices == 0 {
        return Err(NistError::too_short(TestId::BinaryMatrixRank, per_matrix, n));
    }
    let mut counts = [0u64; 3];
    for chunk in bits.chunks_exact(per_matrix).take(matrices) {
        let mut rows: Vec<u32> = chunk
            .chunks_exact(COLS)
            .map(|row| row.iter().fold(0u32, |acc, &b| (acc << 1) | b as u32))
            .collect();
        match gf2_rank(&mut rows) {
            r if r == ROWS => counts[0] += 1,
            r if r == ROWS - 1 => counts[1] += 1,
            _ => counts[2] += 1,
        }
    }
    let p_full = rank_probability(ROWS, ROWS, COLS);
    let p_minus = rank_probability(ROWS - 1, ROWS, COLS);
    let probs = [p_full, p_minus, 1.0 - p_full - p_minus];
    let chi2 = chi_square(&counts, &probs, matrices as f64);
    Ok(vec![igamc(1.0, chi2 / 2.0)])
}
