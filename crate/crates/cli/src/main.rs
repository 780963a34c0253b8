//! `renewal-pricer`: price intraday options on compound renewal price models.

mod config;
mod output;
mod ticks;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use renewal_pricer::calibration::{durations_of, fit_durations, fit_returns, returns_of};
use renewal_pricer::martingale::emm_shift;
use renewal_pricer::montecarlo::{simulate_price, SimConfig};
use renewal_pricer::pricing::{merton_price, price, weights_for, Diagnostics};
use renewal_pricer::renewal::residual_lifetime;
use renewal_pricer::PricerError;
use serde::Serialize;
use serde_json::Value;

use config::{ConfigError, DurationFitFamily, Resolved, ReturnFitFamily};

const THREADS_ENV: &str = "RENEWAL_PRICER_THREADS";

#[derive(Debug, Parser)]
#[command(name = "renewal-pricer", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Price the configured payoff.
    Price {
        #[arg(long)]
        config: PathBuf,
    },
    /// Closed-form price for exponential durations and normal returns.
    Merton {
        #[arg(long)]
        s0: f64,
        #[arg(long)]
        k: f64,
        #[arg(long)]
        lambda: f64,
        #[arg(long, allow_hyphen_values = true)]
        mu: f64,
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        tau: f64,
    },
    /// Counting law of trades between the observation time and maturity.
    Counting {
        #[arg(long)]
        config: PathBuf,
    },
    /// Residual-lifetime CDF at time `t` given `nt` trades so far.
    Residual {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        nt: usize,
    },
    /// Monte Carlo estimate of the configured price.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit a duration or return law from a `t_seconds,price` tick file.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        family: String,
        #[arg(long, value_enum)]
        target: Target,
        /// Count the open (t = 0) as the first epoch.
        #[arg(long)]
        origin_at_open: bool,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Target {
    Durations,
    Returns,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Price { .. } => "price",
            Command::Merton { .. } => "merton",
            Command::Counting { .. } => "counting",
            Command::Residual { .. } => "residual",
            Command::Simulate { .. } => "simulate",
            Command::Fit { .. } => "fit",
        }
    }
}

#[derive(Debug)]
struct Failure {
    kind: &'static str,
    field: Option<String>,
    message: String,
    exit: u8,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure {
            kind: "config",
            field: e.field,
            message: e.message,
            exit: 2,
        }
    }
}

impl From<PricerError> for Failure {
    fn from(e: PricerError) -> Self {
        let field = match &e {
            PricerError::InvalidParameter { name, .. } => Some(name.to_string()),
            _ => None,
        };
        Failure {
            kind: "computation",
            field,
            message: e.to_string(),
            exit: 1,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure {
            kind: "input",
            field: None,
            message: format!("{e:#}"),
            exit: 2,
        }
    }
}

fn load(path: &std::path::Path) -> Result<Resolved, Failure> {
    let (cfg, base) = config::load(path)?;
    Ok(cfg.resolve(&base)?)
}

fn case_name(r: &Resolved) -> &'static str {
    if r.request.at_renewal_epoch {
        "renewal"
    } else {
        "general"
    }
}

#[derive(Serialize)]
struct PriceDoc {
    case: &'static str,
    spot: f64,
    strike_moneyness: Option<f64>,
    /// Currency units: `spot * price_per_spot`.
    price: f64,
    price_per_spot: f64,
    /// Numeraire units (spot = 1).
    diagnostics: Diagnostics,
}

#[derive(Serialize)]
struct CountingDoc {
    case: &'static str,
    horizon: f64,
    n_max: usize,
    tail_mass: f64,
    probs: Vec<f64>,
}

#[derive(Serialize)]
struct ResidualDoc {
    t: f64,
    n_t: usize,
    maturity: f64,
    conditioning_probability: f64,
    u: Vec<f64>,
    cdf: Vec<f64>,
}

#[derive(Serialize)]
struct SimulateDoc {
    case: &'static str,
    seed: u64,
    paths: usize,
    n_effective: usize,
    /// Currency units.
    mean: f64,
    std_error: f64,
}

#[derive(Serialize)]
struct MertonDoc {
    s0: f64,
    k: f64,
    lambda: f64,
    mu: f64,
    sigma: f64,
    tau: f64,
    price: f64,
}

#[derive(Serialize)]
struct FitDoc<M: Serialize> {
    target: &'static str,
    n_samples: usize,
    model: M,
}

fn strike_of(r: &Resolved) -> Option<f64> {
    use renewal_pricer::pricing::Payoff;
    match r.request.payoff {
        Payoff::VanillaCall { strike } | Payoff::VanillaPut { strike } => Some(strike),
        Payoff::Digital { strike, .. } => Some(strike),
        Payoff::Custom(_) => None,
    }
}

fn run(command: &Command) -> Result<Value, Failure> {
    let name = command.name();
    match command {
        Command::Price { config } => {
            let r = load(config)?;
            let result = price(&r.request)?;
            log::info!(
                "priced in {:.3} s (n_max {})",
                result.diagnostics.wall_clock_seconds,
                result.diagnostics.n_max
            );
            Ok(output::document(
                name,
                &PriceDoc {
                    case: case_name(&r),
                    spot: r.spot,
                    strike_moneyness: strike_of(&r),
                    price: r.spot * result.price,
                    price_per_spot: result.price,
                    diagnostics: result.diagnostics,
                },
            ))
        }
        Command::Merton {
            s0,
            k,
            lambda,
            mu,
            sigma,
            tau,
        } => {
            let price = merton_price(*s0, *k, *lambda, *mu, *sigma, *tau)?;
            Ok(output::document(
                name,
                &MertonDoc {
                    s0: *s0,
                    k: *k,
                    lambda: *lambda,
                    mu: *mu,
                    sigma: *sigma,
                    tau: *tau,
                    price,
                },
            ))
        }
        Command::Counting { config } => {
            let r = load(config)?;
            let law = weights_for(&r.request, &r.request.numerics)?;
            Ok(output::document(
                name,
                &CountingDoc {
                    case: case_name(&r),
                    horizon: law.horizon(),
                    n_max: law.n_max(),
                    tail_mass: law.tail_mass(),
                    probs: law.probs().to_vec(),
                },
            ))
        }
        Command::Residual { config, t, nt } => {
            let r = load(config)?;
            let q = &r.request;
            let law = residual_lifetime(&q.durations, *t, *nt, q.maturity, &q.numerics)?;
            let u = (0..law.cdf.len()).map(|i| law.cdf.node(i)).collect();
            Ok(output::document(
                name,
                &ResidualDoc {
                    t: *t,
                    n_t: *nt,
                    maturity: q.maturity,
                    conditioning_probability: law.conditioning_probability,
                    u,
                    cdf: law.cdf.values().to_vec(),
                },
            ))
        }
        Command::Simulate {
            config,
            paths,
            seed,
        } => {
            let r = load(config)?;
            let q = &r.request;
            let paths = paths.unwrap_or(r.mc_paths);
            let seed = seed.unwrap_or(r.seed);
            let shifted = emm_shift(&q.returns)?;
            let sim = if q.at_renewal_epoch {
                SimConfig::new(paths, seed, q.maturity - q.t, q.durations.clone(), shifted)
            } else {
                SimConfig {
                    restart_fast_path: q.numerics.fast_paths,
                    ..SimConfig::new(paths, seed, q.maturity, q.durations.clone(), shifted)
                        .conditioned(q.t, q.n_t)
                }
            };
            let started = Instant::now();
            let est = simulate_price(&sim, &q.payoff)?;
            log::info!(
                "simulated {paths} paths in {:.3} s",
                started.elapsed().as_secs_f64()
            );
            Ok(output::document(
                name,
                &SimulateDoc {
                    case: case_name(&r),
                    seed,
                    paths,
                    n_effective: est.n_effective,
                    mean: r.spot * est.mean,
                    std_error: r.spot * est.std_error,
                },
            ))
        }
        Command::Fit {
            input,
            family,
            target,
            origin_at_open,
        } => {
            let ticks = ticks::read_ticks(input)?;
            let bad_family = |valid: &str| Failure {
                kind: "config",
                field: Some("family".into()),
                message: format!("unknown family `{family}`; expected one of {valid}"),
                exit: 2,
            };
            match target {
                Target::Durations => {
                    let fam = DurationFitFamily::from_str(family, true)
                        .map_err(|_| bad_family("exponential, weibull, lognormal, empirical"))?;
                    let sample = durations_of(&ticks, *origin_at_open)?;
                    let model = fit_durations(&sample, fam.into())?;
                    Ok(output::document(
                        name,
                        &FitDoc {
                            target: "durations",
                            n_samples: sample.len(),
                            model: config::duration_spec(&model),
                        },
                    ))
                }
                Target::Returns => {
                    let fam = ReturnFitFamily::from_str(family, true)
                        .map_err(|_| bad_family("normal, laplace, empirical"))?;
                    let sample = returns_of(&ticks)?;
                    let model = fit_returns(&sample, fam.into())?;
                    Ok(output::document(
                        name,
                        &FitDoc {
                            target: "returns",
                            n_samples: sample.len(),
                            model: config::return_spec(&model),
                        },
                    ))
                }
            }
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().map_err(|_| Failure {
        kind: "config",
        field: Some(THREADS_ENV.into()),
        message: format!("expected a non-negative integer, got `{raw}`"),
        exit: 2,
    })?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure {
            kind: "config",
            field: Some(THREADS_ENV.into()),
            message: e.to_string(),
            exit: 2,
        })?;
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    let name = cli.command.name();
    match configure_threads().and_then(|_| run(&cli.command)) {
        Ok(doc) => {
            println!("{doc}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            log::error!(
                "{}{}",
                f.field
                    .as_deref()
                    .map(|p| format!("{p}: "))
                    .unwrap_or_default(),
                f.message
            );
            println!(
                "{}",
                output::error_document(name, f.kind, f.field.as_deref(), &f.message)
            );
            ExitCode::from(f.exit)
        }
    }
}
