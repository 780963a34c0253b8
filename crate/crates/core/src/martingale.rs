//! Martingale shift of returns and the terminal log-price law.
//!
//! Under the shifted measure `Ỹ = Y - a` with `a = ln E[e^Y]`, so that
//! `S̃(T) = exp(Σ_{i<=N(T)} Ỹ_i)` has unit mean. The terminal law is the
//! mixture `Σ_n P(N = n) F_{Ỹ}^{⋆n}` evaluated in log space, where the
//! multiplicative convolution of price factors is additive convolution.
//!
//! Component laws live on the lattice `x_i = i * h`; component `n` covers
//! `[-L_n, L_n]` with `L_n` growing like `√n`.

use rand::Rng;

use crate::distributions::{convolve_window, discretize, Cdf, GridCdf, ReturnFamily, ReturnModel};
use crate::error::{invalid, PricerError, Result};
use crate::par;
use crate::renewal::CountingLaw;
use crate::special::normal_cdf;

/// Largest mass allowed to escape a component grid.
pub const ESCAPE_TOL: f64 = 1e-9;
/// Tail mass left outside the discretized single-return law.
const BASE_SUPPORT_EPS: f64 = 1e-13;
/// Normal components are evaluated within this many standard deviations.
const NORMAL_WINDOW_SDS: f64 = 12.0;

/// Return law under the equivalent martingale measure.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedReturnModel {
    base: ReturnModel,
    shift: f64,
}

/// `a = ln E[e^Y]`, leaving the base law untouched.
pub fn emm_shift(model: &ReturnModel) -> Result<ShiftedReturnModel> {
    let m = model.mean_exp()?;
    if !(m.is_finite() && m > 0.0) {
        return Err(PricerError::MgfDiverges(format!("E[e^Y] = {m}")));
    }
    let shift = match model.family() {
        ReturnFamily::Normal { mean, sd } => mean + 0.5 * sd * sd,
        ReturnFamily::Laplace { location, scale } => location - (-scale * scale).ln_1p(),
        ReturnFamily::Empirical(_) => m.ln(),
    };
    Ok(ShiftedReturnModel {
        base: model.clone(),
        shift,
    })
}

impl ShiftedReturnModel {
    pub fn base(&self) -> &ReturnModel {
        &self.base
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn cdf(&self, y: f64) -> f64 {
        self.base.cdf(y + self.shift)
    }

    pub fn mean(&self) -> f64 {
        self.base.mean() - self.shift
    }

    pub fn variance(&self) -> f64 {
        self.base.variance()
    }

    pub fn sd(&self) -> f64 {
        self.variance().sqrt()
    }

    /// `E[e^{Ỹ}]`; 1 up to rounding.
    pub fn mean_exp(&self) -> f64 {
        self.base
            .mean_exp()
            .map_or(f64::NAN, |m| m * (-self.shift).exp())
    }

    /// `(mean, sd)` of `Ỹ` when the base law is normal.
    pub fn as_normal(&self) -> Option<(f64, f64)> {
        match self.base.family() {
            ReturnFamily::Normal { mean, sd } => Some((mean - self.shift, *sd)),
            _ => None,
        }
    }

    pub fn effective_support(&self, eps: f64) -> (f64, f64) {
        let (lo, hi) = self.base.effective_support(eps);
        (lo - self.shift, hi - self.shift)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.base.sample(rng) - self.shift
    }

    /// Grid form of the law.
    ///
    /// Parametric laws are sampled at the nodes. Each atom of an empirical
    /// law is split between the two cells whose midpoints bracket it, which
    /// keeps the mean exact; node sampling would shift every atom by up to
    /// half a step.
    pub fn to_grid(&self, origin: f64, step: f64, npoints: usize) -> Result<GridCdf> {
        let ReturnFamily::Empirical(law) = self.base.family() else {
            return discretize(self, origin, step, npoints);
        };
        if npoints < 2 {
            return Err(invalid("npoints", "need at least 2 nodes"));
        }
        let weight = 1.0 / law.len() as f64;
        let mut mass = vec![0.0; npoints + 1];
        for &y in law.sorted() {
            // cell j (1-based) has its midpoint at position j - 1
            let q = (y - self.shift - origin) / step - 0.5;
            let lower = q.floor();
            let frac = q - lower;
            for (cell, w) in [(lower + 1.0, 1.0 - frac), (lower + 2.0, frac)] {
                let idx = cell.clamp(0.0, npoints as f64) as usize;
                mass[idx] += weight * w;
            }
        }
        let mut acc = 0.0;
        let values = mass[..npoints]
            .iter()
            .map(|m| {
                acc += m;
                acc.min(1.0)
            })
            .collect();
        GridCdf::new(origin, step, values)
    }
}

impl Cdf for ShiftedReturnModel {
    fn cdf(&self, y: f64) -> f64 {
        ShiftedReturnModel::cdf(self, y)
    }
}

/// Log-price grid specification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LogGridSpec {
    /// Step `sd(Ỹ) / steps_per_sd`; component `n` spans
    /// `width_sds * sd(Ỹ) * √n + |mean(Ỹ)| * n` plus the single-return support.
    Auto { width_sds: f64, steps_per_sd: f64 },
    /// Every component on `[-half_width, half_width]` with the given step.
    Fixed { half_width: f64, step: f64 },
}

impl Default for LogGridSpec {
    fn default() -> Self {
        LogGridSpec::Auto {
            width_sds: 10.0,
            steps_per_sd: 128.0,
        }
    }
}

impl LogGridSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        match *self {
            LogGridSpec::Auto {
                width_sds,
                steps_per_sd,
            } => {
                if !ok(width_sds) {
                    return Err(invalid("width_sds", "must be > 0"));
                }
                if !(steps_per_sd.is_finite() && steps_per_sd >= 1.0) {
                    return Err(invalid("steps_per_sd", "must be >= 1"));
                }
            }
            LogGridSpec::Fixed { half_width, step } => {
                if !ok(half_width) || !ok(step) || step > half_width {
                    return Err(invalid("log_grid", "need 0 < step <= half_width"));
                }
            }
        }
        Ok(())
    }

    pub fn coarsened(&self) -> Self {
        self.scaled(2.0)
    }

    pub fn refined(&self) -> Self {
        self.scaled(0.5)
    }

    fn scaled(&self, factor: f64) -> Self {
        match *self {
            LogGridSpec::Auto {
                width_sds,
                steps_per_sd,
            } => LogGridSpec::Auto {
                width_sds,
                steps_per_sd: steps_per_sd / factor,
            },
            LogGridSpec::Fixed { half_width, step } => LogGridSpec::Fixed {
                half_width,
                step: step * factor,
            },
        }
    }
}

/// Law of `Σ_{i=1}^n Ỹ_i`.
#[derive(Debug, Clone, PartialEq)]
pub enum ComponentLaw {
    /// `n = 0`: all mass at log-price 0.
    UnitStep,
    Normal {
        mean: f64,
        sd: f64,
        half_width: f64,
    },
    Grid(GridCdf),
}

/// Stieltjes sum of `g` against a component, with cells split at `kinks`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    /// Mass below the lowest node (booked as an atom there).
    pub mass_below: f64,
    /// Mass above the highest node (not included in `value`).
    pub mass_above: f64,
    pub upper_edge: f64,
}

impl ComponentLaw {
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            ComponentLaw::UnitStep => {
                if x >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ComponentLaw::Normal { mean, sd, .. } => normal_cdf((x - mean) / sd),
            ComponentLaw::Grid(g) => g.eval(x),
        }
    }

    /// `∫ g dF` over the component's grid window.
    ///
    /// `kinks` must be sorted; cells containing a kink are split there so
    /// piecewise-smooth payoffs keep second-order accuracy.
    pub fn quadrature<G: Fn(f64) -> f64>(&self, step: f64, g: G, kinks: &[f64]) -> Quadrature {
        match self {
            ComponentLaw::UnitStep => Quadrature {
                value: g(0.0),
                mass_below: 0.0,
                mass_above: 0.0,
                upper_edge: 0.0,
            },
            ComponentLaw::Normal {
                mean,
                sd,
                half_width,
            } => {
                let (lo, hi) = normal_window(*mean, *sd, *half_width, step);
                let values: Vec<f64> = (lo..=hi)
                    .map(|i| normal_cdf((i as f64 * step - mean) / sd))
                    .collect();
                let cdf = |x: f64| normal_cdf((x - mean) / sd);
                stieltjes(lo as f64 * step, step, &values, cdf, g, kinks)
            }
            ComponentLaw::Grid(grid) => stieltjes(
                grid.origin(),
                grid.step(),
                grid.values(),
                |x| grid.eval(x),
                g,
                kinks,
            ),
        }
    }

    /// `E[e^X]` by quadrature on the component grid.
    pub fn mean_exp(&self, step: f64) -> f64 {
        self.quadrature(step, f64::exp, &[]).value
    }

    /// Mean and variance (normalised by captured mass).
    pub fn moments(&self) -> (f64, f64) {
        match self {
            ComponentLaw::UnitStep => (0.0, 0.0),
            ComponentLaw::Normal { mean, sd, .. } => (*mean, sd * sd),
            ComponentLaw::Grid(g) => (g.mean(), g.variance()),
        }
    }

    /// Bound on `E[e^X 1{X > upper edge}]` via `1 - ∫_{<= edge} e^x dF`.
    pub fn exp_tail_bound(&self, step: f64) -> f64 {
        match self {
            ComponentLaw::UnitStep => 0.0,
            ComponentLaw::Normal {
                mean,
                sd,
                half_width,
            } => {
                let (_, hi) = normal_window(*mean, *sd, *half_width, step);
                let edge = hi as f64 * step;
                // E[e^X 1{X > c}] = e^{m + s²/2} Φ((m + s² - c) / s)
                (mean + 0.5 * sd * sd).exp() * normal_cdf((mean + sd * sd - edge) / sd)
            }
            ComponentLaw::Grid(_) => (1.0 - self.mean_exp(step)).max(0.0),
        }
    }
}

/// Lattice index range of a normal component's quadrature window.
fn normal_window(mean: f64, sd: f64, half_width: f64, step: f64) -> (i64, i64) {
    let lo = ((mean - NORMAL_WINDOW_SDS * sd).max(-half_width) / step).floor() as i64;
    let hi = ((mean + NORMAL_WINDOW_SDS * sd).min(half_width) / step).ceil() as i64;
    (lo, hi.max(lo + 1))
}

fn stieltjes<C, G>(
    origin: f64,
    step: f64,
    values: &[f64],
    cdf: C,
    g: G,
    kinks: &[f64],
) -> Quadrature
where
    C: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let n = values.len();
    let mut value = if values[0] != 0.0 {
        values[0] * g(origin)
    } else {
        0.0
    };
    let mut k = kinks.partition_point(|&x| x <= origin);
    for j in 1..n {
        let a = origin + (j - 1) as f64 * step;
        let b = a + step;
        let (fa, fb) = (values[j - 1], values[j]);
        if k < kinks.len() && kinks[k] < b {
            let mut left = a;
            let mut f_left = fa;
            while k < kinks.len() && kinks[k] < b {
                let c = kinks[k];
                let fc = cdf(c).clamp(f_left, fb);
                value += (fc - f_left) * g(0.5 * (left + c));
                left = c;
                f_left = fc;
                k += 1;
            }
            value += (fb - f_left) * g(0.5 * (left + b));
        } else if fb != fa {
            value += (fb - fa) * g(a + 0.5 * step);
        }
    }
    Quadrature {
        value,
        mass_below: values[0],
        mass_above: (1.0 - values[n - 1]).max(0.0),
        upper_edge: origin + (n - 1) as f64 * step,
    }
}

/// Component laws `n = 0..=n_max` on a shared log lattice.
///
/// They do not depend on the counting weights, so one set serves both
/// renewal-epoch and general-time pricing.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSet {
    step: f64,
    components: Vec<ComponentLaw>,
}

impl ComponentSet {
    /// Builds components up to `n_max`; `analytic_normal` enables the closed form
    /// for normal returns.
    pub fn build(
        shifted: &ShiftedReturnModel,
        n_max: usize,
        spec: &LogGridSpec,
        analytic_normal: bool,
    ) -> Result<Self> {
        spec.validate()?;
        let sd = shifted.sd();
        if !(sd > 0.0) {
            // Ỹ ≡ 0: e^{Y - a} = 1 forces a degenerate law at 0.
            let step = match *spec {
                LogGridSpec::Fixed { step, .. } => step,
                LogGridSpec::Auto { .. } => 1.0,
            };
            return Ok(Self {
                step,
                components: vec![ComponentLaw::UnitStep; n_max + 1],
            });
        }
        let drift = shifted.mean();
        let (step, fixed_half_width) = match *spec {
            LogGridSpec::Auto { steps_per_sd, .. } => (sd / steps_per_sd, None),
            LogGridSpec::Fixed { half_width, step } => (step, Some(half_width)),
        };
        let (lo, hi) = shifted.effective_support(BASE_SUPPORT_EPS);
        // two spare cells keep split atoms at the support edge on the grid
        let base_cells = (lo.abs().max(hi.abs()) / step).ceil() as usize + 2;
        let base_half = base_cells as f64 * step;
        let width_sds = match *spec {
            LogGridSpec::Auto { width_sds, .. } => width_sds,
            LogGridSpec::Fixed { .. } => 10.0,
        };
        let auto_cells = |n: usize| -> usize {
            let w = width_sds * sd * (n as f64).sqrt() + drift.abs() * n as f64 + base_half;
            (w / step).ceil() as usize
        };
        let cells_for = |n: usize| -> usize {
            match fixed_half_width {
                Some(hw) => ((hw / step).round() as usize).max(1),
                None => auto_cells(n),
            }
        };

        let mut components = Vec::with_capacity(n_max + 1);
        components.push(ComponentLaw::UnitStep);
        if n_max == 0 {
            return Ok(Self { step, components });
        }

        if let (true, Some((mean, sd))) = (analytic_normal, shifted.as_normal()) {
            for n in 1..=n_max {
                let half_width = cells_for(n) as f64 * step;
                let law = ComponentLaw::Normal {
                    mean: n as f64 * mean,
                    sd: sd * (n as f64).sqrt(),
                    half_width,
                };
                let below = law.cdf(-half_width);
                let above = 1.0 - law.cdf(half_width);
                check_escape(n, below + above, half_width, auto_cells(n) as f64 * step)?;
                components.push(law);
            }
            return Ok(Self { step, components });
        }

        let base = shifted.to_grid(-base_half, step, 2 * base_cells + 1)?;
        let mut cells = cells_for(1);
        let first = shifted.to_grid(-(cells as f64) * step, step, 2 * cells + 1)?;
        check_escape(
            1,
            escaped(&first),
            cells as f64 * step,
            auto_cells(1) as f64 * step,
        )?;
        let mut current = first;
        components.push(ComponentLaw::Grid(current.clone()));
        for n in 2..=n_max {
            let next_cells = cells_for(n).min(cells + base_cells);
            // raw output node 0 sits at -(cells + base_cells) * h
            let offset = cells + base_cells - next_cells;
            let next = convolve_window(&current, &base, offset, 2 * next_cells + 1)?;
            let half_width = next_cells as f64 * step;
            check_escape(n, escaped(&next), half_width, auto_cells(n) as f64 * step)?;
            components.push(ComponentLaw::Grid(next.clone()));
            current = next;
            cells = next_cells;
        }
        Ok(Self { step, components })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn n_max(&self) -> usize {
        self.components.len() - 1
    }

    pub fn components(&self) -> &[ComponentLaw] {
        &self.components
    }

    pub fn component(&self, n: usize) -> Option<&ComponentLaw> {
        self.components.get(n)
    }
}

fn escaped(g: &GridCdf) -> f64 {
    g.values()[0] + g.overflow_mass()
}

fn check_escape(component: usize, escaped: f64, half_width: f64, required: f64) -> Result<()> {
    if escaped > ESCAPE_TOL {
        return Err(PricerError::GridTooNarrow {
            component,
            escaped,
            half_width,
            required: required.max(1.5 * half_width),
        });
    }
    Ok(())
}

/// `F_{X̃(T)} = Σ_n w_n F_{Ỹ}^{⋆n}` in log space.
#[derive(Debug, Clone, PartialEq)]
pub struct TerminalLogPriceLaw {
    weights: CountingLaw,
    components: ComponentSet,
}

/// Builds the terminal law; the normal closed form is used for normal returns.
pub fn terminal_law(
    shifted: &ShiftedReturnModel,
    weights: &CountingLaw,
    spec: &LogGridSpec,
) -> Result<TerminalLogPriceLaw> {
    let components = ComponentSet::build(shifted, weights.n_max(), spec, true)?;
    TerminalLogPriceLaw::new(weights.clone(), components)
}

impl TerminalLogPriceLaw {
    pub fn new(weights: CountingLaw, components: ComponentSet) -> Result<Self> {
        if components.n_max() < weights.n_max() {
            return Err(invalid(
                "components",
                format!(
                    "cover n <= {} but weights need n <= {}",
                    components.n_max(),
                    weights.n_max()
                ),
            ));
        }
        Ok(Self {
            weights,
            components,
        })
    }

    pub fn weights(&self) -> &CountingLaw {
        &self.weights
    }

    pub fn components(&self) -> &ComponentSet {
        &self.components
    }

    pub fn step(&self) -> f64 {
        self.components.step
    }

    /// Mixture CDF at log-price `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.weights
            .probs()
            .iter()
            .zip(self.components.components())
            .map(|(w, c)| w * c.cdf(x))
            .sum()
    }

    /// Mixture CDF of the price `S̃ = e^X` at `u > 0`.
    pub fn price_cdf(&self, u: f64) -> f64 {
        if u <= 0.0 {
            0.0
        } else {
            self.cdf(u.ln())
        }
    }

    /// Per-component quadrature of `g`, in component order.
    pub fn component_quadratures<G>(&self, g: G, kinks: &[f64]) -> Vec<Quadrature>
    where
        G: Fn(f64) -> f64 + Sync,
    {
        let comps = self.components.components();
        let step = self.step();
        par::map_range(0..self.weights.probs().len(), |n| {
            comps[n].quadrature(step, &g, kinks)
        })
    }

    /// `Σ_n w_n E[e^{X_n}]` over the truncated mixture.
    pub fn mixture_mean(&self) -> f64 {
        let q = self.component_quadratures(f64::exp, &[]);
        let terms: Vec<f64> = self
            .weights
            .probs()
            .iter()
            .zip(&q)
            .map(|(w, q)| w * q.value)
            .collect();
        par::pairwise_sum(&terms)
    }
}
