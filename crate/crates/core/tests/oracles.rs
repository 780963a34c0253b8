//! Analytic laws against independent Monte Carlo estimates.

use renewal_pricer::distributions::{DurationModel, ReturnModel};
use renewal_pricer::martingale::emm_shift;
use renewal_pricer::montecarlo::{simulate_counting, simulate_residual, SimConfig};
use renewal_pricer::numerics::Numerics;
use renewal_pricer::renewal::{
    conditional_counting_pmf, counting_pmf, residual_lifetime, CountingLaw,
};

const PATHS: usize = 1_000_000;

fn config(d: &DurationModel, horizon: f64, seed: u64) -> SimConfig {
    let returns = emm_shift(&ReturnModel::normal(0.0, 0.01).unwrap()).unwrap();
    SimConfig::new(PATHS, seed, horizon, d.clone(), returns)
}

/// Every pmf entry within 4 standard errors (evaluated at the analytic probability).
fn assert_counting_agrees(law: &CountingLaw, sim: &SimConfig) {
    let mc = simulate_counting(sim).unwrap();
    let n = mc.n_effective as f64;
    for k in 0..=law.n_max().max(mc.pmf.len()) {
        let p = law.prob(k);
        let se = (p * (1.0 - p) / n).sqrt();
        let diff = (mc.prob(k) - p).abs();
        assert!(
            diff <= 4.0 * se + 1.0 / n,
            "n={k}: analytic {p}, mc {}",
            mc.prob(k)
        );
    }
}

#[test]
fn weibull_counting_matches_simulation() {
    let d = DurationModel::weibull(1.5, 1.0).unwrap();
    let numerics = Numerics::default();
    let law = counting_pmf(&d, 2.0, numerics.eps_tail, &numerics).unwrap();
    assert_counting_agrees(&law, &config(&d, 2.0, 11));
}

#[test]
fn conditional_counting_matches_simulation() {
    let d = DurationModel::lognormal(-1.0, 0.5).unwrap();
    let numerics = Numerics::default();
    let law = conditional_counting_pmf(&d, 1.0, 2, 2.5, numerics.eps_tail, &numerics).unwrap();
    assert_counting_agrees(&law, &config(&d, 2.5, 12).conditioned(1.0, 2));
}

#[test]
fn residual_lifetime_passes_ks() {
    let d = DurationModel::weibull(1.5, 1.0).unwrap();
    let law = residual_lifetime(&d, 1.0, 1, 3.0, &Numerics::default()).unwrap();
    let mc = simulate_residual(&config(&d, 3.0, 13).conditioned(1.0, 1)).unwrap();
    let ks = mc.ks_statistic(|u| law.cdf.eval(u));
    assert!(
        ks < mc.ks_critical_99(),
        "KS {ks} vs {}",
        mc.ks_critical_99()
    );
}

#[test]
fn exponential_counting_is_poisson() {
    let d = DurationModel::exponential(4.0).unwrap();
    let numerics = Numerics {
        fast_paths: false,
        ..Numerics::default()
    };
    let law = counting_pmf(&d, 0.5, numerics.eps_tail, &numerics).unwrap();
    let mut pois = (-2.0f64).exp();
    for n in 0..=law.n_max() {
        assert!((law.prob(n) - pois).abs() < 1e-6, "n={n}");
        pois *= 2.0 / (n + 1) as f64;
    }
}
