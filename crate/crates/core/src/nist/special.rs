use statrs::function::{erf, gamma};

pub(crate) fn erfc(x: f64) -> f64 {
    erf::erfc(x)
}

/// Regularized upper incomplete gamma function Q(a, x).
pub(crate) fn igamc(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma::gamma_ur(a, x).clamp(0.0, 1.0)
}

/// Standard normal CDF.
pub(crate) fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Pearson statistic `sum (obs - n p)^2 / (n p)`.
pub(crate) fn chi_square(observed: &[u64], probabilities: &[f64], total: f64) -> f64 {
    observed
        .iter()
        .zip(probabilities)
        .map(|(&o, &p)| {
            let e = total * p;
            (o as f64 - e).powi(2) / e
        })
        .sum()
}
