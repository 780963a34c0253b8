//! Monte Carlo oracle for the counting, residual-lifetime and pricing laws.
//!
//! Path `i` draws from its own ChaCha8 stream `(seed, i)`, so estimates are
//! bit-identical for any thread count. Conditioning on `N(t) = n_t` is by
//! rejection; exponential durations may instead restart at `t`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::distributions::DurationModel;
use crate::error::{invalid, PricerError, Result};
use crate::martingale::ShiftedReturnModel;
use crate::par;
use crate::pricing::Payoff;

/// Smallest acceptable fraction of paths satisfying the conditioning event.
pub const MIN_ACCEPTANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_paths: usize,
    pub seed: u64,
    /// Paths are simulated on `[0, horizon]`.
    pub horizon: f64,
    pub durations: DurationModel,
    pub returns: ShiftedReturnModel,
    /// `(t, n_t)`: keep only paths with `N(t) = n_t`; outcomes refer to `(t, horizon]`.
    pub conditioning: Option<(f64, usize)>,
    /// For exponential durations, start afresh at `t` instead of rejecting.
    pub restart_fast_path: bool,
}

impl SimConfig {
    pub fn new(
        n_paths: usize,
        seed: u64,
        horizon: f64,
        durations: DurationModel,
        returns: ShiftedReturnModel,
    ) -> Self {
        Self {
            n_paths,
            seed,
            horizon,
            durations,
            returns,
            conditioning: None,
            restart_fast_path: false,
        }
    }

    pub fn conditioned(mut self, t: f64, n_t: usize) -> Self {
        self.conditioning = Some((t, n_t));
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(invalid("n_paths", "must be >= 1"));
        }
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(invalid("horizon", "must be finite and >= 0"));
        }
        if let Some((t, _)) = self.conditioning {
            if !(t >= 0.0 && t <= self.horizon) {
                return Err(invalid(
                    "t",
                    format!("must lie in [0, {}], got {t}", self.horizon),
                ));
            }
        }
        Ok(())
    }

    fn start(&self) -> f64 {
        self.conditioning.map_or(0.0, |(t, _)| t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    /// Sample standard deviation over `√n_effective`.
    pub std_error: f64,
    pub n_effective: usize,
}

/// Empirical pmf of the number of trades in `(start, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountingEstimate {
    pub pmf: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub n_effective: usize,
}

impl CountingEstimate {
    pub fn prob(&self, n: usize) -> f64 {
        self.pmf.get(n).copied().unwrap_or(0.0)
    }
}

/// Empirical residual lifetime, censored at the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualEstimate {
    /// Sorted residual times; censored paths are stored as `span`.
    samples: Vec<f64>,
    /// `horizon - t`: the CDF is 1 from here on.
    span: f64,
}

impl ResidualEstimate {
    pub fn n_effective(&self) -> usize {
        self.samples.len()
    }

    pub fn span(&self) -> f64 {
        self.span
    }

    pub fn cdf(&self, u: f64) -> f64 {
        if u >= self.span {
            return 1.0;
        }
        self.samples.partition_point(|&s| s <= u) as f64 / self.samples.len() as f64
    }

    pub fn std_error(&self, u: f64) -> f64 {
        let p = self.cdf(u);
        (p * (1.0 - p) / self.samples.len() as f64).sqrt()
    }

    /// Kolmogorov–Smirnov distance to `cdf` over `[0, span)`.
    pub fn ks_statistic<F: Fn(f64) -> f64>(&self, cdf: F) -> f64 {
        let n = self.samples.len() as f64;
        let mut d: f64 = 0.0;
        for (i, &s) in self.samples.iter().enumerate() {
            if s >= self.span {
                break;
            }
            let f = cdf(s);
            d = d
                .max((f - i as f64 / n).abs())
                .max(((i + 1) as f64 / n - f).abs());
        }
        d
    }

    /// Asymptotic 99% Kolmogorov–Smirnov critical value.
    pub fn ks_critical_99(&self) -> f64 {
        1.628 / (self.samples.len() as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy)]
struct Path {
    accepted: bool,
    count: usize,
    log_return: f64,
    residual: f64,
}

const REJECTED: Path = Path {
    accepted: false,
    count: 0,
    log_return: 0.0,
    residual: 0.0,
};

fn path_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn simulate_path(config: &SimConfig, index: usize) -> Path {
    let mut rng = path_rng(config.seed, index);
    let durations = &config.durations;
    let (t, n_t) = config.conditioning.unwrap_or((0.0, 0));
    let restart = config.restart_fast_path && durations.exponential_rate().is_some();

    // first arrival after t
    let mut arrival = if restart {
        t + durations.sample(&mut rng)
    } else {
        let mut time = 0.0;
        let mut seen = 0usize;
        loop {
            let next = time + durations.sample(&mut rng);
            if next > t {
                if seen != n_t {
                    return REJECTED;
                }
                break next;
            }
            seen += 1;
            if seen > n_t {
                return REJECTED;
            }
            time = next;
        }
    };
    let residual = arrival.min(config.horizon) - t;
    let mut count = 0usize;
    let mut log_return = 0.0;
    while arrival <= config.horizon {
        count += 1;
        log_return += config.returns.sample(&mut rng);
        arrival += durations.sample(&mut rng);
    }
    Path {
        accepted: true,
        count,
        log_return,
        residual,
    }
}

fn accepted_paths(config: &SimConfig) -> Result<Vec<Path>> {
    config.validate()?;
    let paths: Vec<Path> = par::map_range(0..config.n_paths, |i| simulate_path(config, i))
        .into_iter()
        .filter(|p| p.accepted)
        .collect();
    let rate = paths.len() as f64 / config.n_paths as f64;
    if config.conditioning.is_some() && (rate < MIN_ACCEPTANCE || paths.is_empty()) {
        return Err(PricerError::ConditioningTooRare { rate });
    }
    Ok(paths)
}

fn estimate(values: &[f64]) -> McEstimate {
    let n = values.len();
    let mean = par::pairwise_sum(values) / n as f64;
    let std_error = if n > 1 {
        let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
        (par::pairwise_sum(&dev) / (n - 1) as f64 / n as f64).sqrt()
    } else {
        0.0
    };
    McEstimate {
        mean,
        std_error,
        n_effective: n,
    }
}

/// Sample mean of `f(S̃(horizon))`, with `S̃ = 1` at the start of the window.
pub fn simulate_expectation<F>(config: &SimConfig, f: F) -> Result<McEstimate>
where
    F: Fn(f64) -> f64,
{
    let paths = accepted_paths(config)?;
    let values: Vec<f64> = paths.iter().map(|p| f(p.log_return.exp())).collect();
    Ok(estimate(&values))
}

pub fn simulate_price(config: &SimConfig, payoff: &Payoff) -> Result<McEstimate> {
    simulate_expectation(config, |u| payoff.value(u))
}

pub fn simulate_counting(config: &SimConfig) -> Result<CountingEstimate> {
    let paths = accepted_paths(config)?;
    let n = paths.len();
    let top = paths.iter().map(|p| p.count).max().unwrap_or(0);
    let mut tally = vec![0usize; top + 1];
    for p in &paths {
        tally[p.count] += 1;
    }
    let pmf: Vec<f64> = tally.iter().map(|&c| c as f64 / n as f64).collect();
    let std_errors = pmf
        .iter()
        .map(|p| (p * (1.0 - p) / n as f64).sqrt())
        .collect();
    Ok(CountingEstimate {
        pmf,
        std_errors,
        n_effective: n,
    })
}

pub fn simulate_residual(config: &SimConfig) -> Result<ResidualEstimate> {
    let paths = accepted_paths(config)?;
    let mut samples: Vec<f64> = paths.iter().map(|p| p.residual).collect();
    samples.sort_by(f64::total_cmp);
    Ok(ResidualEstimate {
        samples,
        span: config.horizon - config.start(),
    })
}
