use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::empirical::EmpiricalLaw;
use super::Cdf;
use crate::error::{invalid, Result};
use crate::special::normal_cdf;

/// Parametric family of an inter-trade duration law. Times are in seconds.
#[derive(Debug, Clone, PartialEq)]
pub enum DurationFamily {
    Exponential { rate: f64 },
    Weibull { shape: f64, scale: f64 },
    Lognormal { log_mean: f64, log_sd: f64 },
    Uniform { lo: f64, hi: f64 },
    Empirical(EmpiricalLaw),
}

/// Law of the i.i.d. positive waiting times between trades.
///
/// Parameters are validated on construction, so every method is total.
/// All families satisfy `cdf(0) = 0`: simultaneous trades are excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct DurationModel {
    family: DurationFamily,
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite and > 0, got {v}")))
    }
}

impl DurationModel {
    pub fn exponential(rate: f64) -> Result<Self> {
        positive("rate", rate)?;
        Ok(Self {
            family: DurationFamily::Exponential { rate },
        })
    }

    pub fn weibull(shape: f64, scale: f64) -> Result<Self> {
        positive("shape", shape)?;
        positive("scale", scale)?;
        Ok(Self {
            family: DurationFamily::Weibull { shape, scale },
        })
    }

    pub fn lognormal(log_mean: f64, log_sd: f64) -> Result<Self> {
        if !log_mean.is_finite() {
            return Err(invalid("log_mean", "must be finite"));
        }
        positive("log_sd", log_sd)?;
        Ok(Self {
            family: DurationFamily::Lognormal { log_mean, log_sd },
        })
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && lo >= 0.0) {
            return Err(invalid("lo", format!("must be finite and >= 0, got {lo}")));
        }
        if !(hi.is_finite() && hi > lo) {
            return Err(invalid("hi", format!("must exceed lo={lo}, got {hi}")));
        }
        Ok(Self {
            family: DurationFamily::Uniform { lo, hi },
        })
    }

    /// Empirical law of observed durations; every value must be strictly positive.
    pub fn empirical(sample: Vec<f64>) -> Result<Self> {
        if let Some(bad) = sample.iter().find(|&&x| !(x > 0.0)) {
            return Err(invalid(
                "sample",
                format!("durations must be > 0, found {bad}"),
            ));
        }
        Ok(Self {
            family: DurationFamily::Empirical(EmpiricalLaw::new(sample)?),
        })
    }

    pub fn family(&self) -> &DurationFamily {
        &self.family
    }

    /// Rate of the exponential family, which unlocks the memoryless fast paths.
    pub fn exponential_rate(&self) -> Option<f64> {
        match self.family {
            DurationFamily::Exponential { rate } => Some(rate),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.family {
            DurationFamily::Exponential { .. } => "exponential",
            DurationFamily::Weibull { .. } => "weibull",
            DurationFamily::Lognormal { .. } => "lognormal",
            DurationFamily::Uniform { .. } => "uniform",
            DurationFamily::Empirical(_) => "empirical",
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match &self.family {
            DurationFamily::Exponential { rate } => -(-rate * t).exp_m1(),
            DurationFamily::Weibull { shape, scale } => -(-(t / scale).powf(*shape)).exp_m1(),
            DurationFamily::Lognormal { log_mean, log_sd } => {
                normal_cdf((t.ln() - log_mean) / log_sd)
            }
            DurationFamily::Uniform { lo, hi } => ((t - lo) / (hi - lo)).clamp(0.0, 1.0),
            DurationFamily::Empirical(law) => law.cdf(t),
        }
    }

    pub fn mean(&self) -> f64 {
        match &self.family {
            DurationFamily::Exponential { rate } => 1.0 / rate,
            DurationFamily::Weibull { shape, scale } => {
                scale * crate::special::ln_gamma(1.0 + 1.0 / shape).exp()
            }
            DurationFamily::Lognormal { log_mean, log_sd } => {
                (log_mean + 0.5 * log_sd * log_sd).exp()
            }
            DurationFamily::Uniform { lo, hi } => 0.5 * (lo + hi),
            DurationFamily::Empirical(law) => law.mean(),
        }
    }

    /// Draws one duration. Every family is sampled by inversion or an exact transform.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.family {
            DurationFamily::Exponential { rate } => {
                let u: f64 = rng.random();
                -(1.0 - u).ln() / rate
            }
            DurationFamily::Weibull { shape, scale } => {
                let u: f64 = rng.random();
                scale * (-(1.0 - u).ln()).powf(1.0 / shape)
            }
            DurationFamily::Lognormal { log_mean, log_sd } => {
                let z: f64 = StandardNormal.sample(rng);
                (log_mean + log_sd * z).exp()
            }
            DurationFamily::Uniform { lo, hi } => {
                let u: f64 = rng.random();
                lo + (hi - lo) * u
            }
            DurationFamily::Empirical(law) => law.sample(rng),
        }
    }
}

impl Cdf for DurationModel {
    fn cdf(&self, x: f64) -> f64 {
        DurationModel::cdf(self, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positive_laws_vanish_at_origin() {
        let models = [
            DurationModel::exponential(1.0).unwrap(),
            DurationModel::weibull(1.5, 1.0).unwrap(),
            DurationModel::lognormal(-1.0, 0.5).unwrap(),
            DurationModel::uniform(0.0, 1.0).unwrap(),
            DurationModel::empirical(vec![0.2, 0.4]).unwrap(),
        ];
        for m in &models {
            assert_eq!(m.cdf(0.0), 0.0, "{}", m.name());
            assert_eq!(m.cdf(-3.0), 0.0, "{}", m.name());
            assert!(m.cdf(1e6) > 1.0 - 1e-12, "{}", m.name());
        }
    }

    #[test]
    fn exponential_median() {
        let m = DurationModel::exponential(2.0).unwrap();
        assert!((m.cdf(std::f64::consts::LN_2 / 2.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(DurationModel::exponential(0.0).is_err());
        assert!(DurationModel::exponential(-1.0).is_err());
        assert!(DurationModel::weibull(1.0, 0.0).is_err());
        assert!(DurationModel::lognormal(0.0, 0.0).is_err());
        assert!(DurationModel::uniform(1.0, 1.0).is_err());
        assert!(DurationModel::uniform(-0.5, 1.0).is_err());
        assert!(DurationModel::empirical(vec![]).is_err());
        assert!(DurationModel::empirical(vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn empirical_is_right_continuous() {
        let m = DurationModel::empirical(vec![3.0, 1.0, 2.0, 2.0]).unwrap();
        assert_eq!(m.cdf(0.999), 0.0);
        assert_eq!(m.cdf(1.0), 0.25);
        assert_eq!(m.cdf(2.0), 0.75);
        assert_eq!(m.cdf(2.5), 0.75);
        assert_eq!(m.cdf(3.0), 1.0);
    }

    #[test]
    fn means() {
        assert!((DurationModel::weibull(1.0, 2.0).unwrap().mean() - 2.0).abs() < 1e-12);
        assert_eq!(DurationModel::uniform(1.0, 3.0).unwrap().mean(), 2.0);
    }
}
