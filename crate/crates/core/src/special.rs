use libm::erfc;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Upper tail `1 - Φ(x)` without cancellation for large `x`.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// Poisson probability mass `P(N = n)` for mean `mean`, computed in log space.
pub fn poisson_pmf(mean: f64, n: usize) -> f64 {
    if mean == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let k = n as f64;
    (-mean + k * mean.ln() - ln_gamma(k + 1.0)).exp()
}

/// Poisson upper tail `P(N > n)`.
pub fn poisson_tail(mean: f64, n: usize) -> f64 {
    if mean == 0.0 {
        return 0.0;
    }
    // P(N <= n) = Q(n + 1, mean), so P(N > n) is the lower regularized gamma.
    statrs::function::gamma::gamma_lr(n as f64 + 1.0, mean)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_cdf_reference_points() {
        assert_eq!(normal_cdf(0.0), 0.5);
        let q = normal_cdf(1.959_963_984_540_054);
        assert!((q - 0.975).abs() < 1e-15, "{q}");
        assert!(normal_cdf(-8.0) < 1e-15);
        let tail = normal_sf(10.0);
        assert!(
            (tail / 7.619_853_024_160_527e-24 - 1.0).abs() < 1e-13,
            "{tail:e}"
        );
    }

    #[test]
    fn poisson_helpers() {
        assert!((poisson_pmf(1.0, 0) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((poisson_pmf(1.0, 2) - 0.5 * (-1.0f64).exp()).abs() < 1e-15);
        let head: f64 = (0..=3).map(|n| poisson_pmf(2.5, n)).sum();
        assert!((poisson_tail(2.5, 3) - (1.0 - head)).abs() < 1e-14);
        assert_eq!(poisson_pmf(0.0, 0), 1.0);
    }
}
