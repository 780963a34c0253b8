//! Marginal fits of duration and return laws from tick data.

use crate::distributions::{DurationModel, ReturnModel};
use crate::error::{invalid, PricerError, Result};

const WEIBULL_TOL: f64 = 1e-10;
const WEIBULL_MAX_ITER: usize = 200;

/// Trade epochs (seconds from the open) and prices.
#[derive(Debug, Clone, PartialEq)]
pub struct TickSeries {
    epochs: Vec<f64>,
    prices: Vec<f64>,
}

impl TickSeries {
    /// Epochs must be strictly increasing: equal timestamps are rejected.
    pub fn new(epochs: Vec<f64>, prices: Vec<f64>) -> Result<Self> {
        if epochs.len() != prices.len() {
            return Err(invalid("prices", "must have one price per epoch"));
        }
        if epochs.is_empty() {
            return Err(PricerError::InsufficientData("empty tick series".into()));
        }
        if epochs.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(invalid("epochs", "must be finite and >= 0"));
        }
        if let Some(i) = epochs.windows(2).position(|w| w[1] <= w[0]) {
            return Err(invalid(
                "epochs",
                format!(
                    "must be strictly increasing; row {} repeats or goes back",
                    i + 2
                ),
            ));
        }
        if prices.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(invalid("prices", "must be finite and > 0"));
        }
        Ok(Self { epochs, prices })
    }

    pub fn epochs(&self) -> &[f64] {
        &self.epochs
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }
}

fn need_two(series: &TickSeries) -> Result<()> {
    if series.len() < 2 {
        return Err(PricerError::InsufficientData(format!(
            "need at least 2 ticks, got {}",
            series.len()
        )));
    }
    Ok(())
}

/// Inter-trade durations; with `origin_at_open` the open `T_0 = 0` counts as an epoch.
pub fn durations_of(series: &TickSeries, origin_at_open: bool) -> Result<Vec<f64>> {
    need_two(series)?;
    let e = &series.epochs;
    let mut out = Vec::with_capacity(e.len());
    if origin_at_open {
        if e[0] <= 0.0 {
            return Err(invalid(
                "epochs",
                "first trade at the open gives a zero duration",
            ));
        }
        out.push(e[0]);
    }
    out.extend(e.windows(2).map(|w| w[1] - w[0]));
    Ok(out)
}

/// Tick-by-tick log-returns `ln(S_i / S_{i-1})`.
pub fn returns_of(series: &TickSeries) -> Result<Vec<f64>> {
    need_two(series)?;
    Ok(series
        .prices
        .windows(2)
        .map(|w| (w[1] / w[0]).ln())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DurationFamilyKind {
    Exponential,
    Weibull,
    Lognormal,
    Empirical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReturnFamilyKind {
    Normal,
    Laplace,
    Empirical,
}

fn check_sample(samples: &[f64]) -> Result<()> {
    if samples.is_empty() {
        return Err(PricerError::InsufficientData("empty sample".into()));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(invalid("samples", "must be finite"));
    }
    Ok(())
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Maximum-likelihood fit of a duration law (empirical stores the sample).
pub fn fit_durations(samples: &[f64], family: DurationFamilyKind) -> Result<DurationModel> {
    check_sample(samples)?;
    if samples.iter().any(|x| *x <= 0.0) {
        return Err(invalid("samples", "durations must be > 0"));
    }
    match family {
        DurationFamilyKind::Exponential => DurationModel::exponential(1.0 / mean(samples)),
        DurationFamilyKind::Weibull => {
            let (shape, scale) = weibull_mle(samples)?;
            DurationModel::weibull(shape, scale)
        }
        DurationFamilyKind::Lognormal => {
            let logs: Vec<f64> = samples.iter().map(|x| x.ln()).collect();
            let m = mean(&logs);
            let var = logs.iter().map(|l| (l - m) * (l - m)).sum::<f64>() / logs.len() as f64;
            if !(var > 0.0) {
                return Err(PricerError::InsufficientData(
                    "durations have zero spread".into(),
                ));
            }
            DurationModel::lognormal(m, var.sqrt())
        }
        DurationFamilyKind::Empirical => DurationModel::empirical(samples.to_vec()),
    }
}

/// Fit of a return law: sample mean/sd, Laplace MLE, or the sample itself.
pub fn fit_returns(samples: &[f64], family: ReturnFamilyKind) -> Result<ReturnModel> {
    check_sample(samples)?;
    match family {
        ReturnFamilyKind::Normal => {
            if samples.len() < 2 {
                return Err(PricerError::InsufficientData(
                    "normal fit needs 2 returns".into(),
                ));
            }
            let m = mean(samples);
            let var =
                samples.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (samples.len() - 1) as f64;
            if !(var > 0.0) {
                return Err(PricerError::InsufficientData(
                    "returns have zero variance".into(),
                ));
            }
            ReturnModel::normal(m, var.sqrt())
        }
        ReturnFamilyKind::Laplace => {
            let mut sorted = samples.to_vec();
            sorted.sort_by(f64::total_cmp);
            let n = sorted.len();
            let median = if n % 2 == 1 {
                sorted[n / 2]
            } else {
                0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
            };
            let scale = sorted.iter().map(|x| (x - median).abs()).sum::<f64>() / n as f64;
            if !(scale > 0.0) {
                return Err(PricerError::InsufficientData(
                    "returns have zero spread".into(),
                ));
            }
            ReturnModel::laplace(median, scale)
        }
        ReturnFamilyKind::Empirical => ReturnModel::empirical(samples.to_vec()),
    }
}

/// Weibull MLE `(shape, scale)`.
///
/// The shape solves `Σ x^k ln x / Σ x^k - 1/k - mean(ln x) = 0`, which is
/// increasing in `k`; Newton steps that leave the bracket fall back to bisection.
pub fn weibull_mle(samples: &[f64]) -> Result<(f64, f64)> {
    let top = samples.iter().cloned().fold(f64::MIN, f64::max);
    // work with x / max(x) so that x^k cannot overflow
    let logs: Vec<f64> = samples.iter().map(|x| (x / top).ln()).collect();
    let mean_log = mean(&logs);
    let equation = |k: f64| -> (f64, f64) {
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for &l in &logs {
            let w = (k * l).exp();
            s0 += w;
            s1 += w * l;
            s2 += w * l * l;
        }
        let r = s1 / s0;
        let g = r - 1.0 / k - mean_log;
        let dg = s2 / s0 - r * r + 1.0 / (k * k);
        (g, dg)
    };

    let mut lo = 1.0;
    let mut hi = 1.0;
    let mut expand = 0;
    while equation(lo).0 > 0.0 {
        lo *= 0.5;
        expand += 1;
        if expand > 60 {
            return Err(PricerError::FitNotConverged(
                "Weibull shape bracket (low)".into(),
            ));
        }
    }
    while equation(hi).0 < 0.0 {
        hi *= 2.0;
        expand += 1;
        if expand > 60 {
            return Err(PricerError::FitNotConverged(
                "Weibull shape bracket: sample has no spread".into(),
            ));
        }
    }

    let mut k = 0.5 * (lo + hi);
    for _ in 0..WEIBULL_MAX_ITER {
        let (g, dg) = equation(k);
        if g < 0.0 {
            lo = k;
        } else {
            hi = k;
        }
        let newton = k - g / dg;
        let next = if dg > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - k).abs() <= WEIBULL_TOL * k.max(1.0) {
            let sum: f64 = logs.iter().map(|l| (next * l).exp()).sum();
            let scale = top * (sum / logs.len() as f64).powf(1.0 / next);
            return Ok((next, scale));
        }
        k = next;
    }
    Err(PricerError::FitNotConverged(format!(
        "Weibull shape after {WEIBULL_MAX_ITER} iterations"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{DurationFamily, ReturnFamily};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn durations_and_origin() {
        let s = TickSeries::new(vec![1.0, 3.0, 6.0], vec![1.0; 3]).unwrap();
        assert_eq!(durations_of(&s, false).unwrap(), vec![2.0, 3.0]);
        assert_eq!(durations_of(&s, true).unwrap(), vec![1.0, 2.0, 3.0]);
        let one = TickSeries::new(vec![1.0], vec![1.0]).unwrap();
        assert!(durations_of(&one, false).is_err());
    }

    #[test]
    fn ties_are_rejected() {
        assert!(TickSeries::new(vec![1.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(TickSeries::new(vec![1.0, 2.0], vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn returns_telescope() {
        let e = std::f64::consts::E;
        let s = TickSeries::new(vec![0.5, 1.0, 2.0], vec![1.0, e, e]).unwrap();
        let r = returns_of(&s).unwrap();
        assert!((r[0] - 1.0).abs() < 1e-15 && r[1] == 0.0);
        let prices = vec![100.0, 100.5, 99.75, 101.25, 100.0];
        let s = TickSeries::new(vec![1.0, 2.0, 3.0, 4.0, 5.0], prices).unwrap();
        let sum: f64 = returns_of(&s).unwrap().iter().sum();
        assert!(sum.abs() < 1e-12);
    }

    #[test]
    fn exponential_mle() {
        let m = fit_durations(&[1.0, 2.0, 3.0], DurationFamilyKind::Exponential).unwrap();
        assert_eq!(m.exponential_rate(), Some(0.5));
    }

    #[test]
    fn empirical_returns_keep_mgf() {
        let m = fit_returns(&[0.01; 4], ReturnFamilyKind::Empirical).unwrap();
        assert!((m.mean_exp().unwrap() - 0.01f64.exp()).abs() < 1e-15);
        assert!(fit_returns(&[0.01; 4], ReturnFamilyKind::Normal).is_err());
    }

    #[test]
    fn weibull_round_trip() {
        let truth = DurationModel::weibull(1.5, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..100_000).map(|_| truth.sample(&mut rng)).collect();
        let fit = fit_durations(&xs, DurationFamilyKind::Weibull).unwrap();
        match fit.family() {
            DurationFamily::Weibull { shape, scale } => {
                assert!((shape / 1.5 - 1.0).abs() < 0.02);
                assert!((scale / 2.0 - 1.0).abs() < 0.02);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn weibull_degenerate_sample_fails() {
        assert!(weibull_mle(&[2.0; 10]).is_err());
    }

    #[test]
    fn laplace_fit() {
        let m = fit_returns(&[-2.0, 0.0, 1.0, 3.0, 0.5], ReturnFamilyKind::Laplace).unwrap();
        match m.family() {
            ReturnFamily::Laplace { location, scale } => {
                assert_eq!(*location, 0.5);
                assert!((scale - 6.0 / 5.0).abs() < 1e-15);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
