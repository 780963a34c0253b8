//! Option prices under the shifted (martingale) measure with zero rates.
//!
//! Prices are `Σ_n w_n E[C̃(e^{X_n})]`, where the weights are the counting law
//! of trades up to maturity and `X_n` is the sum of `n` shifted returns.
//! Strikes are moneyness: the numeraire price at the observation time is 1.

use std::time::Instant;

use serde::Serialize;

use crate::distributions::{DurationModel, ReturnModel};
use crate::error::{invalid, Result};
use crate::martingale::{emm_shift, ComponentSet, ShiftedReturnModel, TerminalLogPriceLaw};
use crate::numerics::Numerics;
use crate::par;
use crate::renewal::{conditional_counting_pmf, counting_pmf, CountingLaw};
use crate::special::{normal_cdf, poisson_pmf, poisson_tail};

/// Piecewise-linear payoff tabulated against the price.
///
/// Constant below the first node; continues the last segment above the
/// last node, floored at zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TabulatedPayoff {
    prices: Vec<f64>,
    values: Vec<f64>,
}

impl TabulatedPayoff {
    pub fn new(prices: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if prices.len() < 2 || prices.len() != values.len() {
            return Err(invalid(
                "custom",
                "need at least two (price, value) pairs of equal length",
            ));
        }
        if prices.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(invalid("custom.prices", "must be finite and > 0"));
        }
        if prices.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("custom.prices", "must be strictly increasing"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid("custom.values", "must be finite and >= 0"));
        }
        Ok(Self { prices, values })
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn last_slope(&self) -> f64 {
        let n = self.prices.len();
        (self.values[n - 1] - self.values[n - 2]) / (self.prices[n - 1] - self.prices[n - 2])
    }

    pub fn value(&self, u: f64) -> f64 {
        let p = &self.prices;
        let v = &self.values;
        let n = p.len();
        if u <= p[0] {
            return v[0];
        }
        if u >= p[n - 1] {
            return (v[n - 1] + self.last_slope() * (u - p[n - 1])).max(0.0);
        }
        let i = p.partition_point(|&x| x <= u);
        let w = (u - p[i - 1]) / (p[i] - p[i - 1]);
        v[i - 1] + w * (v[i] - v[i - 1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payoff {
    VanillaCall { strike: f64 },
    VanillaPut { strike: f64 },
    Digital { strike: f64, cash: f64 },
    Custom(TabulatedPayoff),
}

impl Payoff {
    pub fn call(strike: f64) -> Result<Self> {
        check_strike(strike)?;
        Ok(Payoff::VanillaCall { strike })
    }

    pub fn put(strike: f64) -> Result<Self> {
        check_strike(strike)?;
        Ok(Payoff::VanillaPut { strike })
    }

    pub fn digital(strike: f64, cash: f64) -> Result<Self> {
        check_strike(strike)?;
        if !(cash.is_finite() && cash > 0.0) {
            return Err(invalid(
                "cash",
                format!("must be finite and > 0, got {cash}"),
            ));
        }
        Ok(Payoff::Digital { strike, cash })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Payoff::VanillaCall { strike } | Payoff::VanillaPut { strike } => check_strike(*strike),
            Payoff::Digital { strike, cash } => Payoff::digital(*strike, *cash).map(|_| ()),
            Payoff::Custom(t) => {
                TabulatedPayoff::new(t.prices.clone(), t.values.clone()).map(|_| ())
            }
        }
    }

    /// Payoff at terminal price `u` (in units of the numeraire).
    pub fn value(&self, u: f64) -> f64 {
        match self {
            Payoff::VanillaCall { strike } => (u - strike).max(0.0),
            Payoff::VanillaPut { strike } => (strike - u).max(0.0),
            Payoff::Digital { strike, cash } => {
                if u > *strike {
                    *cash
                } else {
                    0.0
                }
            }
            Payoff::Custom(t) => t.value(u),
        }
    }

    /// `(c0, c1)` with `payoff(u) <= c0 + c1 * u` for all `u > 0`.
    pub fn growth_bound(&self) -> (f64, f64) {
        match self {
            Payoff::VanillaCall { .. } => (0.0, 1.0),
            Payoff::VanillaPut { strike } => (*strike, 0.0),
            Payoff::Digital { cash, .. } => (*cash, 0.0),
            Payoff::Custom(t) => {
                let c1 = t.last_slope().max(0.0);
                let c0 = t
                    .prices
                    .iter()
                    .zip(&t.values)
                    .map(|(u, v)| v - c1 * u)
                    .fold(t.values[0], f64::max);
                (c0.max(0.0), c1)
            }
        }
    }

    /// Log-prices where the payoff is not smooth, sorted.
    pub fn log_kinks(&self) -> Vec<f64> {
        match self {
            Payoff::VanillaCall { strike }
            | Payoff::VanillaPut { strike }
            | Payoff::Digital { strike, .. } => vec![strike.ln()],
            Payoff::Custom(t) => t.prices.iter().map(|p| p.ln()).collect(),
        }
    }
}

fn check_strike(strike: f64) -> Result<()> {
    if strike.is_finite() && strike > 0.0 {
        Ok(())
    } else {
        Err(invalid(
            "strike",
            format!("must be finite and > 0, got {strike}"),
        ))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PricingRequest {
    pub durations: DurationModel,
    pub returns: ReturnModel,
    /// Observation time, seconds since the open.
    pub t: f64,
    /// Trades observed in `[0, t]`.
    pub n_t: usize,
    /// Maturity, seconds since the open.
    pub maturity: f64,
    pub payoff: Payoff,
    /// Treat `t` as a renewal epoch (a trade just happened).
    pub at_renewal_epoch: bool,
    pub numerics: Numerics,
}

impl PricingRequest {
    pub fn validate(&self) -> Result<()> {
        self.numerics.validate()?;
        self.payoff.validate()?;
        if !(self.t.is_finite() && self.t >= 0.0) {
            return Err(invalid(
                "t",
                format!("must be finite and >= 0, got {}", self.t),
            ));
        }
        if !(self.maturity > self.t) {
            return Err(invalid(
                "maturity",
                format!("must exceed t = {}, got {}", self.t, self.maturity),
            ));
        }
        if self.maturity > self.numerics.trading_day {
            return Err(invalid(
                "maturity",
                format!(
                    "{} exceeds the trading day of {} s",
                    self.maturity, self.numerics.trading_day
                ),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub n_max: usize,
    /// Counting mass beyond `n_max`.
    pub tail_mass: f64,
    /// `Σ_n w_n E[e^{X_n}]` over the truncated mixture.
    pub martingale_mean: f64,
    /// Payoff mass escaping the log grids, bounded through the growth bound.
    pub grid_tail_bound: f64,
    /// `|price - price on a grid twice as coarse|`; 0 when not requested.
    pub discretization_estimate: f64,
    /// `grid_tail_bound + tail_mass * (c0 + c1) + discretization_estimate`.
    pub truncation_bias_bound: f64,
    pub time_step: f64,
    pub log_step: f64,
    #[serde(skip)]
    pub wall_clock_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PricingResult {
    pub price: f64,
    pub diagnostics: Diagnostics,
}

/// Price of the payoff under a given counting law of trades to maturity.
#[derive(Debug, Clone, PartialEq)]
pub struct MixturePrice {
    pub price: f64,
    pub martingale_mean: f64,
    pub grid_tail_bound: f64,
    pub log_step: f64,
}

/// Payoff expectation against the terminal law built from `weights`.
pub fn price_mixture(
    shifted: &ShiftedReturnModel,
    weights: &CountingLaw,
    payoff: &Payoff,
    numerics: &Numerics,
) -> Result<MixturePrice> {
    let components = ComponentSet::build(
        shifted,
        weights.n_max(),
        &numerics.log_grid,
        numerics.fast_paths,
    )?;
    price_with_components(weights, components, payoff)
}

fn price_with_components(
    weights: &CountingLaw,
    components: ComponentSet,
    payoff: &Payoff,
) -> Result<MixturePrice> {
    let law = TerminalLogPriceLaw::new(weights.clone(), components)?;
    let kinks = payoff.log_kinks();
    let quad = law.component_quadratures(|x| payoff.value(x.exp()), &kinks);
    let w = weights.probs();
    let terms: Vec<f64> = w.iter().zip(&quad).map(|(w, q)| w * q.value).collect();
    let price = par::pairwise_sum(&terms).max(0.0);

    let (c0, c1) = payoff.growth_bound();
    let step = law.step();
    let comps = law.components().components();
    let tails = par::map_range(0..w.len(), |n| {
        let above = quad[n].mass_above;
        let exp_tail = if c1 > 0.0 {
            comps[n].exp_tail_bound(step)
        } else {
            0.0
        };
        w[n] * (c0 * above + c1 * exp_tail)
    });
    Ok(MixturePrice {
        price,
        martingale_mean: law.mixture_mean(),
        grid_tail_bound: par::pairwise_sum(&tails),
        log_step: step,
    })
}

/// Counting law of trades in `(t, T_M]` for the request's case.
pub fn weights_for(request: &PricingRequest, numerics: &Numerics) -> Result<CountingLaw> {
    let horizon = request.maturity - request.t;
    if request.at_renewal_epoch {
        counting_pmf(&request.durations, horizon, numerics.eps_tail, numerics)
    } else {
        conditional_counting_pmf(
            &request.durations,
            request.t,
            request.n_t,
            request.maturity,
            numerics.eps_tail,
            numerics,
        )
    }
}

fn price_once(
    request: &PricingRequest,
    numerics: &Numerics,
) -> Result<(CountingLaw, MixturePrice)> {
    let shifted = emm_shift(&request.returns)?;
    let weights = weights_for(request, numerics)?;
    let mixture = price_mixture(&shifted, &weights, &request.payoff, numerics)?;
    Ok((weights, mixture))
}

/// Prices the request in the case it declares.
pub fn price(request: &PricingRequest) -> Result<PricingResult> {
    request.validate()?;
    let started = Instant::now();
    let numerics = &request.numerics;
    let (weights, mixture) = price_once(request, numerics)?;
    let discretization_estimate = if numerics.error_estimate {
        let (_, coarse) = price_once(request, &numerics.coarsened())?;
        (mixture.price - coarse.price).abs()
    } else {
        0.0
    };
    let (c0, c1) = request.payoff.growth_bound();
    let tail_mass = weights.tail_mass();
    let horizon = request.maturity - request.t;
    let time_step = crate::numerics::time_grid(horizon, numerics.h_time).0;
    Ok(PricingResult {
        price: mixture.price,
        diagnostics: Diagnostics {
            n_max: weights.n_max(),
            tail_mass,
            martingale_mean: mixture.martingale_mean,
            grid_tail_bound: mixture.grid_tail_bound,
            discretization_estimate,
            truncation_bias_bound: mixture.grid_tail_bound
                + tail_mass * (c0 + c1)
                + discretization_estimate,
            time_step,
            log_step: mixture.log_step,
            wall_clock_seconds: started.elapsed().as_secs_f64(),
        },
    })
}

/// Price when the observation time is a renewal epoch; horizon `T_M - t`.
pub fn price_at_renewal(request: &PricingRequest) -> Result<PricingResult> {
    price(&PricingRequest {
        at_renewal_epoch: true,
        ..request.clone()
    })
}

/// Price at an arbitrary time `t` given `n_t` trades so far.
pub fn price_general(request: &PricingRequest) -> Result<PricingResult> {
    price(&PricingRequest {
        at_renewal_epoch: false,
        ..request.clone()
    })
}

/// Closed-form call price for exponential durations and normal returns.
///
/// Under the shifted measure each return has mean `-σ²/2`, so the price
/// does not depend on `mu`; it is still validated. The `n = 0` term is
/// `max(0, S0 - K)`.
pub fn merton_price(s0: f64, k: f64, lambda: f64, mu: f64, sigma: f64, tau: f64) -> Result<f64> {
    for (name, v) in [
        ("s0", s0),
        ("k", k),
        ("lambda", lambda),
        ("sigma", sigma),
        ("tau", tau),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(invalid(name, format!("must be finite and > 0, got {v}")));
        }
    }
    if !mu.is_finite() {
        return Err(invalid("mu", "must be finite"));
    }
    let mean = lambda * tau;
    let log_moneyness = (s0 / k).ln();
    let mut terms = vec![poisson_pmf(mean, 0) * (s0 - k).max(0.0)];
    let mut n = 1usize;
    loop {
        let sd = sigma * (n as f64).sqrt();
        let d1 = (log_moneyness + 0.5 * sd * sd) / sd;
        let d2 = d1 - sd;
        let c_n = s0 * normal_cdf(d1) - k * normal_cdf(d2);
        terms.push(poisson_pmf(mean, n) * c_n.max(0.0));
        if n as f64 > mean && poisson_tail(mean, n) < 1e-17 {
            break;
        }
        n += 1;
    }
    Ok(par::pairwise_sum(&terms))
}

/// `(C - P) - (1 - K)`: zero under exact put-call parity with unit numeraire.
pub fn put_call_parity_check(call: &PricingResult, put: &PricingResult, strike: f64) -> f64 {
    (call.price - put.price) - (1.0 - strike)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request(payoff: Payoff) -> PricingRequest {
        PricingRequest {
            durations: DurationModel::exponential(100.0).unwrap(),
            returns: ReturnModel::normal(0.0, 0.01).unwrap(),
            t: 0.0,
            n_t: 0,
            maturity: 0.1,
            payoff,
            at_renewal_epoch: true,
            numerics: Numerics::default(),
        }
    }

    #[test]
    fn merton_golden_value() {
        let sigma: f64 = 0.01;
        let c = merton_price(1.0, 1.0, 10.0, -0.5 * sigma * sigma, sigma, 1.0).unwrap();
        assert!((c - 0.012_449_202_258_786_5).abs() < 1e-15);
    }

    #[test]
    fn merton_limits() {
        let c = merton_price(1.0, 1e-12, 5.0, 0.0, 0.01, 1.0).unwrap();
        assert!((c - 1.0).abs() < 1e-10);
        let c = merton_price(1.0, 0.9, 1e-12, 0.0, 0.01, 1.0).unwrap();
        assert!((c - 0.1).abs() < 1e-10);
        assert!(merton_price(1.0, 1.0, -1.0, 0.0, 0.01, 1.0).is_err());
    }

    #[test]
    fn exponential_normal_matches_merton() {
        let r = price(&request(Payoff::call(1.0).unwrap())).unwrap();
        let m = merton_price(1.0, 1.0, 100.0, 0.0, 0.01, 0.1).unwrap();
        assert!(((r.price - m) / m).abs() < 1e-4, "{} vs {m}", r.price);
        assert!((r.diagnostics.martingale_mean - 1.0).abs() < 1e-8);
    }

    #[test]
    fn zero_strike_call_is_unit_mean() {
        let r = price(&request(Payoff::call(1e-12).unwrap())).unwrap();
        assert!((r.price - 1.0).abs() < 1e-6);
    }

    #[test]
    fn tiny_maturity_pays_intrinsic() {
        let mut q = request(Payoff::call(0.95).unwrap());
        q.maturity = 1e-9;
        let r = price(&q).unwrap();
        assert!((r.price - 0.05).abs() < 1e-6);
    }

    #[test]
    fn parity_holds() {
        for &k in &[0.97, 1.0, 1.04] {
            let c = price(&request(Payoff::call(k).unwrap())).unwrap();
            let p = price(&request(Payoff::put(k).unwrap())).unwrap();
            assert!(put_call_parity_check(&c, &p, k).abs() < 1e-6);
        }
    }

    #[test]
    fn deep_otm_is_negligible() {
        let r = price(&request(Payoff::call(10.0).unwrap())).unwrap();
        assert!(r.price <= 1e-6);
        assert!(r.diagnostics.n_max <= 2000);
    }

    #[test]
    fn general_case_collapses_for_exponential() {
        let mut q = request(Payoff::call(1.0).unwrap());
        q.t = 0.05;
        q.n_t = 4;
        q.maturity = 0.15;
        let general = price_general(&q).unwrap();
        let renewal = price_at_renewal(&q).unwrap();
        assert!((general.price - renewal.price).abs() < 1e-6);
    }

    #[test]
    fn custom_payoff_reproduces_call() {
        let tab = TabulatedPayoff::new(vec![0.5, 1.0, 2.0], vec![0.0, 0.0, 1.0]).unwrap();
        let custom = price(&request(Payoff::Custom(tab))).unwrap();
        let call = price(&request(Payoff::call(1.0).unwrap())).unwrap();
        assert!((custom.price - call.price).abs() < 1e-12);
    }

    #[test]
    fn payoff_helpers() {
        let tab = TabulatedPayoff::new(vec![1.0, 2.0], vec![1.0, 3.0]).unwrap();
        assert_eq!(tab.value(0.5), 1.0);
        assert_eq!(tab.value(1.5), 2.0);
        assert_eq!(tab.value(3.0), 5.0);
        let (c0, c1) = Payoff::Custom(tab).growth_bound();
        assert_eq!((c0, c1), (1.0, 2.0));
        assert!(TabulatedPayoff::new(vec![1.0, 1.0], vec![0.0, 0.0]).is_err());
        assert!(Payoff::call(0.0).is_err());
        assert_eq!(Payoff::digital(1.0, 2.0).unwrap().value(1.5), 2.0);
    }

    #[test]
    fn request_validation() {
        let mut q = request(Payoff::call(1.0).unwrap());
        q.t = 0.2;
        assert!(price(&q).is_err());
        q.t = 0.0;
        q.maturity = 40_000.0;
        assert!(price(&q).is_err());
    }
}
