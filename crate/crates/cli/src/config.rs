//! JSON run configuration: `model`, `pricing` and `numerics` sections.

use std::path::{Path, PathBuf};

use renewal_pricer::calibration::{
    durations_of, fit_durations, fit_returns, returns_of, DurationFamilyKind, ReturnFamilyKind,
};
use renewal_pricer::distributions::{DurationModel, ReturnModel};
use renewal_pricer::martingale::LogGridSpec;
use renewal_pricer::numerics::Numerics;
use renewal_pricer::pricing::{Payoff, PricingRequest, TabulatedPayoff};
use serde::Deserialize;

use crate::ticks::read_ticks;

/// Failure tied to a configuration field.
#[derive(Debug)]
pub struct ConfigError {
    pub field: Option<String>,
    pub message: String,
}

impl ConfigError {
    fn at(field: &str, message: impl std::fmt::Display) -> Self {
        Self {
            field: Some(field.to_string()),
            message: message.to_string(),
        }
    }
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.field {
            Some(field) => write!(f, "{field}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub pricing: PricingSection,
    #[serde(default)]
    pub numerics: NumericsSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub durations: DurationSpec,
    pub returns: ReturnSpec,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DurationFitFamily {
    Exponential,
    Weibull,
    Lognormal,
    Empirical,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ReturnFitFamily {
    Normal,
    Laplace,
    Empirical,
}

impl From<DurationFitFamily> for DurationFamilyKind {
    fn from(f: DurationFitFamily) -> Self {
        match f {
            DurationFitFamily::Exponential => DurationFamilyKind::Exponential,
            DurationFitFamily::Weibull => DurationFamilyKind::Weibull,
            DurationFitFamily::Lognormal => DurationFamilyKind::Lognormal,
            DurationFitFamily::Empirical => DurationFamilyKind::Empirical,
        }
    }
}

impl From<ReturnFitFamily> for ReturnFamilyKind {
    fn from(f: ReturnFitFamily) -> Self {
        match f {
            ReturnFitFamily::Normal => ReturnFamilyKind::Normal,
            ReturnFitFamily::Laplace => ReturnFamilyKind::Laplace,
            ReturnFitFamily::Empirical => ReturnFamilyKind::Empirical,
        }
    }
}

#[derive(Debug, Clone, Deserialize, serde::Serialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DurationSpec {
    Exponential {
        rate: f64,
    },
    Weibull {
        shape: f64,
        scale: f64,
    },
    Lognormal {
        log_mean: f64,
        log_sd: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    Empirical {
        sample: Vec<f64>,
    },
    #[serde(skip_serializing)]
    FromTicks {
        input: PathBuf,
        fit: DurationFitFamily,
        #[serde(default)]
        origin_at_open: bool,
    },
}

#[derive(Debug, Clone, Deserialize, serde::Serialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReturnSpec {
    Normal {
        mean: f64,
        sd: f64,
    },
    Laplace {
        location: f64,
        scale: f64,
    },
    Empirical {
        sample: Vec<f64>,
    },
    #[serde(skip_serializing)]
    FromTicks {
        input: PathBuf,
        fit: ReturnFitFamily,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PayoffSpec {
    Call {
        strike: f64,
    },
    Put {
        strike: f64,
    },
    Digital {
        strike: f64,
        cash: f64,
    },
    /// Payoff values (currency) against absolute prices.
    Custom {
        prices: Vec<f64>,
        values: Vec<f64>,
    },
}

fn default_spot() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PricingSection {
    #[serde(default)]
    pub t: f64,
    #[serde(default)]
    pub n_t: usize,
    pub maturity: f64,
    #[serde(default = "default_spot")]
    pub spot: f64,
    pub payoff: PayoffSpec,
    #[serde(default = "default_true")]
    pub at_renewal: bool,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum LogGridConfig {
    Auto {
        #[serde(default = "default_width_sds")]
        width_sds: f64,
        #[serde(default = "default_steps_per_sd")]
        steps_per_sd: f64,
    },
    Fixed {
        half_width: f64,
        step: f64,
    },
}

fn default_width_sds() -> f64 {
    10.0
}

fn default_steps_per_sd() -> f64 {
    128.0
}

impl Default for LogGridConfig {
    fn default() -> Self {
        LogGridConfig::Auto {
            width_sds: default_width_sds(),
            steps_per_sd: default_steps_per_sd(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericsSection {
    pub h_time: f64,
    pub log_grid: LogGridConfig,
    pub eps_tail: f64,
    pub max_count: usize,
    pub denominator_floor: f64,
    pub fast_paths: bool,
    pub trading_day: f64,
    pub error_estimate: bool,
    pub mc_paths: usize,
    pub seed: u64,
}

impl Default for NumericsSection {
    fn default() -> Self {
        let n = Numerics::default();
        Self {
            h_time: n.h_time,
            log_grid: LogGridConfig::default(),
            eps_tail: n.eps_tail,
            max_count: n.max_count,
            denominator_floor: n.denominator_floor,
            fast_paths: n.fast_paths,
            trading_day: n.trading_day,
            error_estimate: n.error_estimate,
            mc_paths: 100_000,
            seed: 1,
        }
    }
}

/// Parses a configuration document, reporting the path of any offending field.
pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ConfigError {
            field: (path != ".").then_some(path),
            message: e.into_inner().to_string(),
        }
    })
}

pub fn load(path: &Path) -> Result<(RunConfig, PathBuf), ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::at("config", format!("cannot read {}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((parse(&text)?, base))
}

fn resolve(base: &Path, input: &Path) -> PathBuf {
    if input.is_absolute() {
        input.to_path_buf()
    } else {
        base.join(input)
    }
}

/// Validated, fully resolved inputs of a run.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub request: PricingRequest,
    pub spot: f64,
    pub mc_paths: usize,
    pub seed: u64,
}

impl RunConfig {
    pub fn resolve(&self, base: &Path) -> Result<Resolved, ConfigError> {
        let durations = self.durations(base)?;
        let returns = self.returns(base)?;
        let p = &self.pricing;
        let spot = p.spot;
        if !(spot.is_finite() && spot > 0.0) {
            return Err(ConfigError::at("pricing.spot", "must be finite and > 0"));
        }
        let payoff = match &p.payoff {
            PayoffSpec::Call { strike } => Payoff::call(strike / spot),
            PayoffSpec::Put { strike } => Payoff::put(strike / spot),
            PayoffSpec::Digital { strike, cash } => Payoff::digital(strike / spot, cash / spot),
            PayoffSpec::Custom { prices, values } => TabulatedPayoff::new(
                prices.iter().map(|u| u / spot).collect(),
                values.iter().map(|v| v / spot).collect(),
            )
            .map(Payoff::Custom),
        }
        .map_err(|e| ConfigError::at("pricing.payoff", e))?;

        let n = &self.numerics;
        let log_grid = match n.log_grid {
            LogGridConfig::Auto {
                width_sds,
                steps_per_sd,
            } => LogGridSpec::Auto {
                width_sds,
                steps_per_sd,
            },
            LogGridConfig::Fixed { half_width, step } => LogGridSpec::Fixed { half_width, step },
        };
        let numerics = Numerics {
            h_time: n.h_time,
            log_grid,
            eps_tail: n.eps_tail,
            max_count: n.max_count,
            denominator_floor: n.denominator_floor,
            fast_paths: n.fast_paths,
            powering: Default::default(),
            trading_day: n.trading_day,
            error_estimate: n.error_estimate,
        };
        numerics
            .validate()
            .map_err(|e| ConfigError::at("numerics", e))?;
        if n.mc_paths == 0 {
            return Err(ConfigError::at("numerics.mc_paths", "must be >= 1"));
        }
        let request = PricingRequest {
            durations,
            returns,
            t: p.t,
            n_t: p.n_t,
            maturity: p.maturity,
            payoff,
            at_renewal_epoch: p.at_renewal,
            numerics,
        };
        request
            .validate()
            .map_err(|e| ConfigError::at("pricing", e))?;
        Ok(Resolved {
            request,
            spot,
            mc_paths: n.mc_paths,
            seed: n.seed,
        })
    }

    fn durations(&self, base: &Path) -> Result<DurationModel, ConfigError> {
        const FIELD: &str = "model.durations";
        let fail = |e| ConfigError::at(FIELD, e);
        match &self.model.durations {
            DurationSpec::Exponential { rate } => DurationModel::exponential(*rate).map_err(fail),
            DurationSpec::Weibull { shape, scale } => {
                DurationModel::weibull(*shape, *scale).map_err(fail)
            }
            DurationSpec::Lognormal { log_mean, log_sd } => {
                DurationModel::lognormal(*log_mean, *log_sd).map_err(fail)
            }
            DurationSpec::Uniform { lo, hi } => DurationModel::uniform(*lo, *hi).map_err(fail),
            DurationSpec::Empirical { sample } => {
                DurationModel::empirical(sample.clone()).map_err(fail)
            }
            DurationSpec::FromTicks {
                input,
                fit,
                origin_at_open,
            } => {
                let ticks = read_ticks(&resolve(base, input)).map_err(|e| fail_any(FIELD, e))?;
                let sample = durations_of(&ticks, *origin_at_open).map_err(fail)?;
                fit_durations(&sample, (*fit).into()).map_err(fail)
            }
        }
    }

    fn returns(&self, base: &Path) -> Result<ReturnModel, ConfigError> {
        const FIELD: &str = "model.returns";
        let fail = |e| ConfigError::at(FIELD, e);
        match &self.model.returns {
            ReturnSpec::Normal { mean, sd } => ReturnModel::normal(*mean, *sd).map_err(fail),
            ReturnSpec::Laplace { location, scale } => {
                ReturnModel::laplace(*location, *scale).map_err(fail)
            }
            ReturnSpec::Empirical { sample } => {
                ReturnModel::empirical(sample.clone()).map_err(fail)
            }
            ReturnSpec::FromTicks { input, fit } => {
                let ticks = read_ticks(&resolve(base, input)).map_err(|e| fail_any(FIELD, e))?;
                let sample = returns_of(&ticks).map_err(fail)?;
                fit_returns(&sample, (*fit).into()).map_err(fail)
            }
        }
    }
}

fn fail_any(field: &str, e: anyhow::Error) -> ConfigError {
    ConfigError::at(field, format!("{e:#}"))
}

/// Config-fragment form of a fitted duration law.
pub fn duration_spec(model: &DurationModel) -> DurationSpec {
    use renewal_pricer::distributions::DurationFamily as F;
    match model.family() {
        F::Exponential { rate } => DurationSpec::Exponential { rate: *rate },
        F::Weibull { shape, scale } => DurationSpec::Weibull {
            shape: *shape,
            scale: *scale,
        },
        F::Lognormal { log_mean, log_sd } => DurationSpec::Lognormal {
            log_mean: *log_mean,
            log_sd: *log_sd,
        },
        F::Uniform { lo, hi } => DurationSpec::Uniform { lo: *lo, hi: *hi },
        F::Empirical(law) => DurationSpec::Empirical {
            sample: law.sorted().to_vec(),
        },
    }
}

/// Config-fragment form of a fitted return law.
pub fn return_spec(model: &ReturnModel) -> ReturnSpec {
    use renewal_pricer::distributions::ReturnFamily as F;
    match model.family() {
        F::Normal { mean, sd } => ReturnSpec::Normal {
            mean: *mean,
            sd: *sd,
        },
        F::Laplace { location, scale } => ReturnSpec::Laplace {
            location: *location,
            scale: *scale,
        },
        F::Empirical(law) => ReturnSpec::Empirical {
            sample: law.sorted().to_vec(),
        },
    }
}
