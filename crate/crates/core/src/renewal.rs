//! Laws of the trade-counting process.
//!
//! * [`counting_pmf`]: `P(N(T) = n) = ∫_0^T (1 - F_J(T-u)) dF_J^{⋆n}(u)`
//! * [`residual_lifetime`]: CDF of the time from `t` to the next trade given `N(t) = n_t`
//! * [`conditional_counting_pmf`]: `P(N(T_M) - N(t) = n | N(t) = n_t)`, obtained by
//!   mixing counting laws on the shortened horizon `T_M - t - u` against the
//!   residual-lifetime measure.
//!
//! Exponential durations take closed-form fast paths (Poisson counts,
//! memoryless residual life) when [`Numerics::fast_paths`] is set.

use serde::Serialize;

use crate::distributions::{
    clamp_monotone, convolve_truncated, discretize, nfold_with, DurationModel, GridCdf,
};
use crate::error::{invalid, PricerError, Result};
use crate::numerics::{time_grid, Numerics};
use crate::par;
use crate::special::{poisson_pmf, poisson_tail};

/// Truncated counting distribution `{P(N = n)}_{n <= N_max}` plus the mass left out.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountingLaw {
    probs: Vec<f64>,
    tail_mass: f64,
    horizon: f64,
}

impl CountingLaw {
    pub fn new(probs: Vec<f64>, tail_mass: f64, horizon: f64) -> Result<Self> {
        if probs.is_empty() {
            return Err(invalid("probs", "counting law needs at least one entry"));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(invalid("probs", "probabilities must be finite and >= 0"));
        }
        if !(tail_mass >= 0.0) {
            return Err(invalid("tail_mass", "must be >= 0"));
        }
        Ok(Self {
            probs,
            tail_mass,
            horizon,
        })
    }

    /// Law of a count that is zero with certainty.
    pub fn degenerate(horizon: f64) -> Self {
        Self {
            probs: vec![1.0],
            tail_mass: 0.0,
            horizon,
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, n: usize) -> f64 {
        self.probs.get(n).copied().unwrap_or(0.0)
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_max(&self) -> usize {
        self.probs.len() - 1
    }

    /// `Σ probs + tail_mass`; equals 1 up to rounding.
    pub fn total(&self) -> f64 {
        par::pairwise_sum(&self.probs) + self.tail_mass
    }

    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }
}

/// Residual lifetime `𝒥_{t,n_t}`: time from `t` to the next trade given `N(t) = n_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualLifetimeLaw {
    pub t: f64,
    pub n_t: usize,
    /// CDF in `u` on `[0, horizon - t]`.
    pub cdf: GridCdf,
    /// Probability of the conditioning event `{N(t) = n_t}`.
    pub conditioning_probability: f64,
}

fn check_eps(eps_tail: f64) -> Result<()> {
    if eps_tail > 0.0 && eps_tail < 1.0 {
        Ok(())
    } else {
        Err(invalid(
            "eps_tail",
            format!("must lie in (0, 1), got {eps_tail}"),
        ))
    }
}

fn check_time(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite and >= 0, got {v}")))
    }
}

fn poisson_law(mean: f64, horizon: f64, eps_tail: f64, max_count: usize) -> Result<CountingLaw> {
    let mut probs = Vec::new();
    loop {
        let n = probs.len();
        probs.push(poisson_pmf(mean, n));
        let tail = poisson_tail(mean, n);
        if tail <= eps_tail {
            return CountingLaw::new(probs, tail, horizon);
        }
        if n >= max_count {
            return Err(PricerError::TailNotConverged {
                cap: max_count,
                remaining: tail,
            });
        }
    }
}

/// `P(N(T) = n)` for `n = 0..=N_max`, where `N_max` is the first index whose
/// accumulated mass reaches `1 - eps_tail`.
pub fn counting_pmf(
    durations: &DurationModel,
    horizon: f64,
    eps_tail: f64,
    numerics: &Numerics,
) -> Result<CountingLaw> {
    check_time("horizon", horizon)?;
    check_eps(eps_tail)?;
    if horizon == 0.0 {
        return Ok(CountingLaw::degenerate(0.0));
    }
    if numerics.fast_paths {
        if let Some(rate) = durations.exponential_rate() {
            return poisson_law(rate * horizon, horizon, eps_tail, numerics.max_count);
        }
    }
    let (step, cells) = time_grid(horizon, numerics.h_time);
    let fj = discretize(durations, 0.0, step, cells + 1)?;
    let mut current = GridCdf::unit_step(0.0, step, cells + 1)?;
    let mut probs = Vec::new();
    loop {
        probs.push(survival_integral(&current, &fj, cells).max(0.0));
        let next = convolve_truncated(&current, &fj, horizon)?;
        let tail = next.values()[cells];
        if tail <= eps_tail {
            return CountingLaw::new(probs, tail, horizon);
        }
        if probs.len() > numerics.max_count {
            return Err(PricerError::TailNotConverged {
                cap: numerics.max_count,
                remaining: tail,
            });
        }
        current = next;
    }
}

/// Stieltjes sum of `∫_0^T (1 - F_J(T - u)) dF(u)` with `T` the node `cells`.
fn survival_integral(measure: &GridCdf, fj: &GridCdf, cells: usize) -> f64 {
    let m = measure.values();
    let g = fj.values();
    let mut acc = m[0] * (1.0 - g[cells]);
    for j in 1..=cells {
        let dm = m[j] - m[j - 1];
        if dm != 0.0 {
            acc += dm * (1.0 - 0.5 * (g[cells - j] + g[cells - j + 1]));
        }
    }
    acc
}

/// Cross-check `P(N(T) = n) = F_J^{⋆n}(T) - F_J^{⋆(n+1)}(T)`.
///
/// Built from [`nfold_with`] (binary powering per `numerics.powering`), not
/// from the recursion used by [`counting_pmf`].
pub fn counting_pmf_check(
    durations: &DurationModel,
    horizon: f64,
    n: usize,
    numerics: &Numerics,
) -> Result<f64> {
    check_time("horizon", horizon)?;
    if horizon == 0.0 {
        return Ok(if n == 0 { 1.0 } else { 0.0 });
    }
    let (step, cells) = time_grid(horizon, numerics.h_time);
    let fj = discretize(durations, 0.0, step, cells + 1)?;
    let at_least_n = nfold_with(&fj, n, numerics.powering)?.values()[cells];
    let at_least_next = nfold_with(&fj, n + 1, numerics.powering)?.values()[cells];
    Ok(at_least_n - at_least_next)
}

fn negligible(t: f64, n_t: usize, probability: f64, floor: f64) -> PricerError {
    PricerError::NegligibleConditioning {
        t,
        n_t,
        probability,
        floor,
    }
}

/// CDF of the residual lifetime at `t` given `n_t` trades in `[0, t]`, on `[0, horizon - t]`.
///
/// The ratio of Stieltjes integrals against `F_J^{⋆n_t}` is evaluated with
/// the analytic duration CDF inside the integrand.
pub fn residual_lifetime(
    durations: &DurationModel,
    t: f64,
    n_t: usize,
    horizon: f64,
    numerics: &Numerics,
) -> Result<ResidualLifetimeLaw> {
    check_time("t", t)?;
    if !(horizon > t) {
        return Err(invalid(
            "horizon",
            format!("must exceed t={t}, got {horizon}"),
        ));
    }
    let span = horizon - t;
    let (step_u, cells_u) = time_grid(span, numerics.h_time);

    if numerics.fast_paths {
        if let Some(rate) = durations.exponential_rate() {
            let probability = poisson_pmf(rate * t, n_t);
            if probability < numerics.denominator_floor {
                return Err(negligible(t, n_t, probability, numerics.denominator_floor));
            }
            let values = (0..=cells_u)
                .map(|i| -(-rate * i as f64 * step_u).exp_m1())
                .collect();
            return Ok(ResidualLifetimeLaw {
                t,
                n_t,
                cdf: GridCdf::new(0.0, step_u, values)?,
                conditioning_probability: probability,
            });
        }
    }

    // Measure dF_J^{⋆n_t}(w) on [0, t] as (location, mass) pairs.
    let masses: Vec<(f64, f64)> = if t == 0.0 || n_t == 0 {
        vec![(0.0, if n_t == 0 { 1.0 } else { 0.0 })]
    } else {
        let (step_w, cells_w) = time_grid(t, numerics.h_time);
        let fj = discretize(durations, 0.0, step_w, cells_w + 1)?;
        let epochs = nfold_with(&fj, n_t, numerics.powering)?;
        let mut out = vec![(0.0, epochs.origin_mass())];
        out.extend(
            (1..=cells_w)
                .map(|j| (epochs.cell_mid(j), epochs.cell_mass(j)))
                .filter(|&(_, m)| m != 0.0),
        );
        out
    };
    // survival of the duration in progress at t, for each mass point
    let alive: Vec<f64> = masses
        .iter()
        .map(|&(w, _)| 1.0 - durations.cdf(t - w))
        .collect();
    let denominator: f64 = masses.iter().zip(&alive).map(|(&(_, m), s)| m * s).sum();
    if !(denominator >= numerics.denominator_floor) || denominator <= 0.0 {
        return Err(negligible(t, n_t, denominator, numerics.denominator_floor));
    }
    let mut values = par::map_range(0..cells_u + 1, |i| {
        let u = i as f64 * step_u;
        let numerator: f64 = masses
            .iter()
            .zip(&alive)
            .map(|(&(w, m), s)| m * (durations.cdf(u + t - w) - (1.0 - s)))
            .sum();
        numerator / denominator
    });
    clamp_monotone(&mut values);
    Ok(ResidualLifetimeLaw {
        t,
        n_t,
        cdf: GridCdf::new(0.0, step_u, values)?,
        conditioning_probability: denominator,
    })
}

/// `P(N(T_M) - N(t) = n | N(t) = n_t)`.
///
/// The `n = 0` entry is `1 - F_𝒥(T_M - t)`: no trade arrives before maturity.
pub fn conditional_counting_pmf(
    durations: &DurationModel,
    t: f64,
    n_t: usize,
    maturity: f64,
    eps_tail: f64,
    numerics: &Numerics,
) -> Result<CountingLaw> {
    check_time("t", t)?;
    check_eps(eps_tail)?;
    if !(maturity > t) {
        return Err(invalid(
            "maturity",
            format!("must exceed t={t}, got {maturity}"),
        ));
    }
    let span = maturity - t;

    if numerics.fast_paths {
        if let Some(rate) = durations.exponential_rate() {
            let probability = poisson_pmf(rate * t, n_t);
            if probability < numerics.denominator_floor {
                return Err(negligible(t, n_t, probability, numerics.denominator_floor));
            }
            return poisson_law(rate * span, span, eps_tail, numerics.max_count);
        }
    }

    let residual = residual_lifetime(durations, t, n_t, maturity, numerics)?;
    let r = residual.cdf.values();
    let cells = r.len() - 1;
    let step = residual.cdf.step();
    let fj = discretize(durations, 0.0, step, cells + 1)?;

    // tail(n) = P(at least n trades in (t, T_M]); P(n) = tail(n) - tail(n + 1).
    // With the residual measure dR(u) this is ∫ F_J^{⋆(n-1)}(T_M - t - u) dR(u).
    let mixed_tail = |family: &GridCdf| -> f64 {
        let f = family.values();
        let mut acc = r[0] * f[cells];
        for j in 1..=cells {
            let dr = r[j] - r[j - 1];
            if dr != 0.0 {
                acc += dr * 0.5 * (f[cells - j] + f[cells - j + 1]);
            }
        }
        acc
    };

    let mut probs = vec![(1.0 - r[cells]).max(0.0)];
    let mut previous_tail = r[cells];
    let mut family = GridCdf::unit_step(0.0, step, cells + 1)?;
    loop {
        family = convolve_truncated(&family, &fj, span)?;
        let tail = mixed_tail(&family);
        probs.push((previous_tail - tail).max(0.0));
        if tail <= eps_tail {
            return CountingLaw::new(probs, tail, span);
        }
        if probs.len() > numerics.max_count {
            return Err(PricerError::TailNotConverged {
                cap: numerics.max_count,
                remaining: tail,
            });
        }
        previous_tail = tail;
    }
}
