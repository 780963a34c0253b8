use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::empirical::EmpiricalLaw;
use super::Cdf;
use crate::error::{invalid, PricerError, Result};
use crate::special::normal_cdf;

/// Parametric family of the tick-by-tick log-return law.
#[derive(Debug, Clone, PartialEq)]
pub enum ReturnFamily {
    Normal { mean: f64, sd: f64 },
    Laplace { location: f64, scale: f64 },
    Empirical(EmpiricalLaw),
}

/// Law of the i.i.d. log-returns `Y_i = log(S(T_i) / S(T_{i-1}))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnModel {
    family: ReturnFamily,
}

impl ReturnModel {
    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        if !mean.is_finite() {
            return Err(invalid("mean", "must be finite"));
        }
        if !(sd.is_finite() && sd > 0.0) {
            return Err(invalid("sd", format!("must be finite and > 0, got {sd}")));
        }
        Ok(Self {
            family: ReturnFamily::Normal { mean, sd },
        })
    }

    pub fn laplace(location: f64, scale: f64) -> Result<Self> {
        if !location.is_finite() {
            return Err(invalid("location", "must be finite"));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(invalid(
                "scale",
                format!("must be finite and > 0, got {scale}"),
            ));
        }
        Ok(Self {
            family: ReturnFamily::Laplace { location, scale },
        })
    }

    pub fn empirical(sample: Vec<f64>) -> Result<Self> {
        Ok(Self {
            family: ReturnFamily::Empirical(EmpiricalLaw::new(sample)?),
        })
    }

    pub fn family(&self) -> &ReturnFamily {
        &self.family
    }

    pub fn name(&self) -> &'static str {
        match self.family {
            ReturnFamily::Normal { .. } => "normal",
            ReturnFamily::Laplace { .. } => "laplace",
            ReturnFamily::Empirical(_) => "empirical",
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match &self.family {
            ReturnFamily::Normal { mean, sd } => normal_cdf((x - mean) / sd),
            ReturnFamily::Laplace { location, scale } => {
                let z = (x - location) / scale;
                if z < 0.0 {
                    0.5 * z.exp()
                } else {
                    1.0 - 0.5 * (-z).exp()
                }
            }
            ReturnFamily::Empirical(law) => law.cdf(x),
        }
    }

    pub fn mean(&self) -> f64 {
        match &self.family {
            ReturnFamily::Normal { mean, .. } => *mean,
            ReturnFamily::Laplace { location, .. } => *location,
            ReturnFamily::Empirical(law) => law.mean(),
        }
    }

    pub fn variance(&self) -> f64 {
        match &self.family {
            ReturnFamily::Normal { sd, .. } => sd * sd,
            ReturnFamily::Laplace { scale, .. } => 2.0 * scale * scale,
            ReturnFamily::Empirical(law) => law.variance(),
        }
    }

    /// `E[e^Y]`, the quantity the martingale shift normalises away.
    pub fn mean_exp(&self) -> Result<f64> {
        match &self.family {
            ReturnFamily::Normal { mean, sd } => Ok((mean + 0.5 * sd * sd).exp()),
            ReturnFamily::Laplace { location, scale } => {
                if *scale >= 1.0 {
                    return Err(PricerError::MgfDiverges(format!(
                        "Laplace scale {scale} >= 1"
                    )));
                }
                Ok(location.exp() / (1.0 - scale * scale))
            }
            ReturnFamily::Empirical(law) => Ok(law.mean_exp()),
        }
    }

    /// Interval outside which the law carries less than `eps` mass on each side.
    pub fn effective_support(&self, eps: f64) -> (f64, f64) {
        match &self.family {
            ReturnFamily::Normal { mean, sd } => {
                let z = normal_quantile_bound(eps);
                (mean - z * sd, mean + z * sd)
            }
            ReturnFamily::Laplace { location, scale } => {
                let w = scale * (0.5 / eps).ln().max(1.0);
                (location - w, location + w)
            }
            ReturnFamily::Empirical(law) => (law.min(), law.max()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.family {
            ReturnFamily::Normal { mean, sd } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + sd * z
            }
            ReturnFamily::Laplace { location, scale } => {
                // inversion on (-1/2, 1/2)
                let u: f64 = rng.random::<f64>() - 0.5;
                let v = (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE);
                location - scale * u.signum() * v.ln()
            }
            ReturnFamily::Empirical(law) => law.sample(rng),
        }
    }
}

impl Cdf for ReturnModel {
    fn cdf(&self, x: f64) -> f64 {
        ReturnModel::cdf(self, x)
    }
}

/// Smallest `z` on a coarse ladder with `1 - Φ(z) <= eps`.
fn normal_quantile_bound(eps: f64) -> f64 {
    let mut z = 1.0;
    while crate::special::normal_sf(z) > eps && z < 40.0 {
        z += 0.25;
    }
    z
}
