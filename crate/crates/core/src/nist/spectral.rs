//! Discrete Fourier transform (spectral) test.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::special::erfc;
use super::{NistError, TestId};

/// `threshold_fraction` is the expected share of peaks under the 95% bound
/// (0.95 in the reference suite).
pub(crate) fn dft(bits: &[u8], threshold_fraction: f64) -> Result<Vec<f64>, NistError> {
    let n = bits.len();
    if n < 2 {
        return Err(NistError::too_short(TestId::DiscreteFourierTransform, 2, n));
    }
    let mut buffer: Vec<Complex<f64>> = bits
        .iter()
        .map(|&b| Complex::new(if b == 1 { 1.0 } else { -1.0 }, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buffer);

    let nf = n as f64;
    let bound = ((1.0f64 / 0.05).ln() * nf).sqrt();
    let below = buffer[..n / 2].iter().filter(|c| c.norm() < bound).count() as f64;
    let expected = threshold_fraction * nf / 2.0;
    let d = (below - expected) / (nf * threshold_fraction * (1.0 - threshold_fraction) / 4.0).sqrt();
    Ok(vec![erfc(d.abs() / std::f64::consts::SQRT_2)])
}
