//! Random-walk tests: cumulative sums and the two random excursion tests.

use super::special::{chi_square, erfc, igamc, normal_cdf};
use super::{NistError, TestId};

/// Minimum cycle count for the excursion tests.
pub const MIN_EXCURSION_CYCLES: usize = 500;

fn cusum_p_value(n: i64, z: i64) -> f64 {
    // Integer bounds follow the reference implementation (truncating division).
    let nf = n as f64;
    let zf = z as f64;
    let sqrt_n = nf.sqrt();
    let mut sum1 = 0.0;
    let mut k = (-n / z + 1) / 4;
    while k <= (n / z - 1) / 4 {
        let kf = k as f64;
        sum1 += normal_cdf((4.0 * kf + 1.0) * zf / sqrt_n) - normal_cdf((4.0 * kf - 1.0) * zf / sqrt_n);
        k += 1;
    }
    let mut sum2 = 0.0;
    let mut k = (-n / z - 3) / 4;
    while k <= (n / z - 1) / 4 {
        let kf = k as f64;
        sum2 += normal_cdf((4.0 * kf + 3.0) * zf / sqrt_n) - normal_cdf((4.0 * kf + 1.0) * zf / sqrt_n);
        k += 1;
    }
    (1.0 - sum1 + sum2).clamp(0.0, 1.0)
}

fn max_excursion<'a>(steps: impl Iterator<Item = &'a u8>) -> i64 {
    let mut s = 0i64;
    let mut z = 0i64;
    for &b in steps {
        s += if b == 1 { 1 } else { -1 };
        z = z.max(s.abs());
    }
    z
}

pub(crate) fn cumulative_sums(bits: &[u8], forward: bool) -> Result<Vec<f64>, NistError> {
    let n = bits.len();
    if n == 0 {
        let id = if forward {
            TestId::CumulativeSumsForward
        } else {
            TestId::CumulativeSumsBackward
        };
        return Err(NistError::too_short(id, 1, n));
    }
    let z = if forward {
        max_excursion(bits.iter())
    } else {
        max_excursion(bits.iter().rev())
    };
    Ok(vec![cusum_p_value(n as i64, z)])
}

/// Partial sums split into zero-to-zero cycles.
struct Walk {
    sums: Vec<i64>,
    /// Index one past the end of each cycle within `sums`.
    cycle_ends: Vec<usize>,
}

fn walk(bits: &[u8]) -> Walk {
    let mut sums = Vec::with_capacity(bits.len());
    let mut s = 0i64;
    let mut cycle_ends = Vec::new();
    for (i, &b) in bits.iter().enumerate() {
        s += if b == 1 { 1 } else { -1 };
        sums.push(s);
        if s == 0 {
            cycle_ends.push(i + 1);
        }
    }
    if s != 0 {
        cycle_ends.push(bits.len());
    }
    Walk { sums, cycle_ends }
}

fn excursion_probabilities(x: i64) -> [f64; 6] {
    let a = 1.0 / (2.0 * x.unsigned_abs() as f64);
    let mut pi = [0.0; 6];
    pi[0] = 1.0 - a;
    for (k, p) in pi.iter_mut().enumerate().take(5).skip(1) {
        *p = a * a * (1.0 - a).powi(k as i32 - 1);
    }
    pi[5] = a * (1.0 - a).powi(4);
    pi
}

pub(crate) fn random_excursions(bits: &[u8]) -> Result<Vec<f64>, NistError> {
    let w = walk(bits);
    let j = w.cycle_ends.len();
    if j < MIN_EXCURSION_CYCLES {
        return Err(NistError::NotApplicable {
            test: TestId::RandomExcursions,
            cycles: j,
        });
    }
    const STATES: [i64; 8] = [-4, -3, -2, -1, 1, 2, 3, 4];
    // nu[state][k]: cycles visiting the state exactly k times (k >= 5 lumped)
    let mut nu = [[0u64; 6]; 8];
    let mut start = 0;
    for &end in &w.cycle_ends {
        let mut visits = [0usize; 8];
        for &s in &w.sums[start..end] {
            if (-4..=4).contains(&s) && s != 0 {
                let idx = if s < 0 { (s + 4) as usize } else { (s + 3) as usize };
                visits[idx] += 1;
            }
        }
        for (state, &v) in visits.iter().enumerate() {
            nu[state][v.min(5)] += 1;
        }
        start = end;
    }
    Ok(STATES
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let chi2 = chi_square(&nu[i], &excursion_probabilities(x), j as f64);
            igamc(2.5, chi2 / 2.0)
        })
        .collect())
}

pub(crate) fn random_excursions_variant(bits: &[u8]) -> Result<Vec<f64>, NistError> {
    let w = walk(bits);
    let j = w.cycle_ends.len();
    if j < MIN_EXCURSION_CYCLES {
        return Err(NistError::NotApplicable {
            test: TestId::RandomExcursionsVariant,
            cycles: j,
        });
    }
    let mut counts = [0u64; 19];
    for &s in &w.sums {
        if (-9..=9).contains(&s) {
            counts[(s + 9) as usize] += 1;
        }
    }
    let jf = j as f64;
    Ok((-9i64..=9)
        .filter(|&x| x != 0)
        .map(|x| {
            let xi = counts[(x + 9) as usize] as f64;
            let den = (2.0 * jf * (4.0 * x.unsigned_abs() as f64 - 2.0)).sqrt();
            erfc((xi - jf).abs() / den)
        })
        .collect())
}
