//! Uniform-grid CDFs and the Lebesgue–Stieltjes convolution engine.
//!
//! A [`GridCdf`] stores CDF samples `F(origin + i*h)`. Between nodes the CDF
//! is read by linear interpolation, which amounts to spreading each cell's
//! mass uniformly over the cell; `values[0]` is an atom at the origin and
//! whatever is missing above the last node is the overflow mass.
//!
//! The sum `W = U + V` of independent variables is evaluated by the
//! midpoint Stieltjes sum
//!
//! ```text
//! F_W(w_k) = F_U(a) G(w_k - a) + Σ_j ΔF_U(j) G(w_k - u_j*)
//! ```
//!
//! where `u_j*` is the midpoint of cell `j`. With both grids on the same
//! step the argument `w_k - u_j*` is a half-node of the `G` grid, so the
//! sum is algebraically symmetric in `U` and `V`.

use super::Cdf;
use crate::error::{invalid, PricerError, Result};
use crate::par;

/// Overflow below this is treated as a complete (proper) distribution.
const COMPLETE_TOL: f64 = 1e-14;
/// Relative tolerance when comparing grid steps.
const STEP_RTOL: f64 = 1e-9;
/// Largest monotonicity/range violation accepted (and clamped) on input.
const INPUT_TOL: f64 = 1e-9;

/// CDF sampled on the uniform grid `origin + i * step`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCdf {
    origin: f64,
    step: f64,
    values: Vec<f64>,
    overflow_mass: f64,
}

impl GridCdf {
    /// Builds a grid CDF, clamping rounding-level violations of monotonicity.
    pub fn new(origin: f64, step: f64, mut values: Vec<f64>) -> Result<Self> {
        if !origin.is_finite() {
            return Err(invalid("origin", "must be finite"));
        }
        if !(step.is_finite() && step > 0.0) {
            return Err(invalid(
                "step",
                format!("must be finite and > 0, got {step}"),
            ));
        }
        if values.is_empty() {
            return Err(invalid("values", "grid needs at least one node"));
        }
        let mut running = f64::NEG_INFINITY;
        for (i, &v) in values.iter().enumerate() {
            if !(-INPUT_TOL..=1.0 + INPUT_TOL).contains(&v) {
                return Err(invalid(
                    "values",
                    format!("value {v} at node {i} outside [0, 1]"),
                ));
            }
            if v < running - INPUT_TOL {
                return Err(invalid("values", format!("CDF decreases at node {i}")));
            }
            running = running.max(v);
        }
        clamp_monotone(&mut values);
        Ok(Self::from_clamped(origin, step, values))
    }

    fn from_clamped(origin: f64, step: f64, values: Vec<f64>) -> Self {
        let overflow_mass = (1.0 - values[values.len() - 1]).max(0.0);
        Self {
            origin,
            step,
            values,
            overflow_mass,
        }
    }

    /// Unit step at `origin`: the law of the constant `origin` (zero-fold convolution).
    pub fn unit_step(origin: f64, step: f64, npoints: usize) -> Result<Self> {
        Self::new(origin, step, vec![1.0; npoints.max(1)])
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn node(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.step
    }

    pub fn last_node(&self) -> f64 {
        self.node(self.values.len() - 1)
    }

    /// Probability mass above the last node.
    pub fn overflow_mass(&self) -> f64 {
        self.overflow_mass
    }

    /// Mass of the atom at the origin (everything at or below the first node).
    pub fn origin_mass(&self) -> f64 {
        self.values[0]
    }

    pub fn is_complete(&self) -> bool {
        self.overflow_mass <= COMPLETE_TOL
    }

    /// Mass of cell `j` = `(node(j-1), node(j)]`, for `j >= 1`.
    pub fn cell_mass(&self, j: usize) -> f64 {
        self.values[j] - self.values[j - 1]
    }

    /// Midpoint of cell `j`.
    pub fn cell_mid(&self, j: usize) -> f64 {
        self.origin + (j as f64 - 0.5) * self.step
    }

    /// Value at node index `m`, extended by 0 below and flat above the grid.
    #[inline]
    fn at(&self, m: isize) -> f64 {
        if m < 0 {
            0.0
        } else if m as usize >= self.values.len() {
            self.values[self.values.len() - 1]
        } else {
            self.values[m as usize]
        }
    }

    /// CDF at an arbitrary point (piecewise-linear between nodes).
    pub fn eval(&self, x: f64) -> f64 {
        let p = (x - self.origin) / self.step;
        if p < -1e-9 {
            return 0.0;
        }
        let p = p.max(0.0);
        let i = p.floor();
        let frac = p - i;
        let i = i as isize;
        let lo = self.at(i);
        if frac <= 0.0 {
            return lo;
        }
        lo + frac * (self.at(i + 1) - lo)
    }

    /// Stieltjes sum `∫ f dF` over the grid: atom at the origin plus cell midpoints.
    ///
    /// Overflow mass above the last node is not included.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let mut acc = self.values[0] * f(self.origin);
        for j in 1..self.values.len() {
            let dm = self.cell_mass(j);
            if dm != 0.0 {
                acc += dm * f(self.cell_mid(j));
            }
        }
        acc
    }

    pub fn mean(&self) -> f64 {
        self.expect(|x| x) / (1.0 - self.overflow_mass)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.expect(|x| (x - m) * (x - m)) / (1.0 - self.overflow_mass)
    }
}

/// Running maximum followed by clipping to `[0, 1]`.
pub(crate) fn clamp_monotone(values: &mut [f64]) {
    let mut running = 0.0f64;
    for v in values.iter_mut() {
        running = running.max(*v);
        *v = running.min(1.0);
    }
}

/// Samples `model`'s CDF at `origin + i * step`, `i = 0..npoints`.
pub fn discretize<C: Cdf + ?Sized>(
    model: &C,
    origin: f64,
    step: f64,
    npoints: usize,
) -> Result<GridCdf> {
    if !(step.is_finite() && step > 0.0) {
        return Err(invalid(
            "step",
            format!("must be finite and > 0, got {step}"),
        ));
    }
    if npoints < 2 {
        return Err(invalid(
            "npoints",
            format!("need at least 2 nodes, got {npoints}"),
        ));
    }
    let values = par::map_range(0..npoints, |i| model.cdf(origin + i as f64 * step));
    GridCdf::new(origin, step, values)
}

fn check_steps(f: &GridCdf, g: &GridCdf) -> Result<()> {
    if (f.step - g.step).abs() > STEP_RTOL * f.step.max(g.step) {
        return Err(PricerError::StepMismatch {
            left: f.step,
            right: g.step,
        });
    }
    Ok(())
}

/// Precomputed index bounds of the integrand grid `g`.
struct Kernel<'a> {
    f: &'a GridCdf,
    g: &'a GridCdf,
    /// first index with `G > 0`
    g_first: isize,
    /// first index from which `G` is constant up to infinity
    g_flat: isize,
    /// first cell of `F` with nonzero mass
    f_first: isize,
}

impl<'a> Kernel<'a> {
    fn new(f: &'a GridCdf, g: &'a GridCdf) -> Self {
        let g_first = g
            .values
            .iter()
            .position(|&v| v > 0.0)
            .unwrap_or(g.values.len()) as isize;
        let g_last = g.values[g.values.len() - 1];
        let g_flat = g
            .values
            .iter()
            .rposition(|&v| v != g_last)
            .map_or(0, |i| i + 1) as isize;
        let f_first = (1..f.values.len())
            .find(|&j| f.values[j] != f.values[j - 1])
            .unwrap_or(f.values.len()) as isize;
        Self {
            f,
            g,
            g_first,
            g_flat,
            f_first,
        }
    }

    /// Unclamped `F_W` at output node `k` (relative to `f.origin + g.origin`).
    fn value(&self, k: isize) -> f64 {
        let fv = &self.f.values;
        let nf = fv.len() as isize;
        let g_last = self.g.values[self.g.values.len() - 1];
        let mut sum = fv[0] * self.g.at(k);
        let j_max = k.min(nf - 1);
        let mut j_lo = 1;
        if self.g_flat <= k {
            let j_flat_hi = (k - self.g_flat).min(j_max);
            if j_flat_hi >= 1 {
                sum += (fv[j_flat_hi as usize] - fv[0]) * g_last;
                j_lo = j_flat_hi + 1;
            }
        }
        let j_hi = j_max.min(k + 1 - self.g_first);
        let j_lo = j_lo.max(self.f_first);
        for j in j_lo..=j_hi {
            let dm = fv[j as usize] - fv[j as usize - 1];
            let m = k - j;
            sum += dm * 0.5 * (self.g.at(m) + self.g.at(m + 1));
        }
        sum
    }
}

/// Raw (unclamped) convolution values at output nodes `first..first + npoints`.
pub(crate) fn convolve_raw(f: &GridCdf, g: &GridCdf, first: usize, npoints: usize) -> Vec<f64> {
    let kernel = Kernel::new(f, g);
    par::map_range(first..first + npoints, |k| kernel.value(k as isize))
}

/// Convolution evaluated on the window `first..first + npoints` of the output grid,
/// whose node 0 sits at `f.origin() + g.origin()`.
pub fn convolve_window(f: &GridCdf, g: &GridCdf, first: usize, npoints: usize) -> Result<GridCdf> {
    check_steps(f, g)?;
    if npoints == 0 {
        return Err(invalid("npoints", "window must contain at least one node"));
    }
    let mut values = convolve_raw(f, g, first, npoints);
    clamp_monotone(&mut values);
    let origin = f.origin + g.origin + first as f64 * f.step;
    Ok(GridCdf::from_clamped(origin, f.step, values))
}

/// Largest output index that is exact given the inputs' overflow masses.
fn valid_points(f: &GridCdf, g: &GridCdf) -> usize {
    let mut n = f.len() + g.len() - 1;
    if !f.is_complete() {
        n = n.min(f.len());
    }
    if !g.is_complete() {
        n = n.min(g.len());
    }
    n
}

/// CDF of `U + V` for independent `U ~ f`, `V ~ g` sharing one grid step.
///
/// The output starts at `f.origin() + g.origin()` and extends as far as the
/// inputs determine it: to the sum of both spans when both are complete,
/// otherwise up to the shorter incomplete horizon.
pub fn convolve(f: &GridCdf, g: &GridCdf) -> Result<GridCdf> {
    check_steps(f, g)?;
    convolve_window(f, g, 0, valid_points(f, g))
}

/// [`convolve`] truncated to nodes at or below `horizon`.
pub fn convolve_truncated(f: &GridCdf, g: &GridCdf, horizon: f64) -> Result<GridCdf> {
    check_steps(f, g)?;
    let origin = f.origin + g.origin;
    let span = (horizon - origin) / f.step;
    if span < -1e-9 {
        return Err(PricerError::BeyondHorizon { horizon });
    }
    let within = (span + 1e-9).floor() as usize + 1;
    convolve_window(f, g, 0, valid_points(f, g).min(within))
}

/// Strategy for n-fold convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Powering {
    /// Binary powering for `n >= 8`, iteration below.
    #[default]
    Auto,
    Always,
    Never,
}

/// Threshold at which [`Powering::Auto`] switches to binary powering.
pub const POWERING_THRESHOLD: usize = 8;

/// `F^{⋆n}` on a grid with as many nodes as `f`, starting at `n * f.origin()`.
///
/// `n = 0` gives the unit step at 0.
pub fn nfold(f: &GridCdf, n: usize) -> Result<GridCdf> {
    nfold_with(f, n, Powering::Auto)
}

pub fn nfold_with(f: &GridCdf, n: usize, powering: Powering) -> Result<GridCdf> {
    let len = f.len();
    let step_to = |x: &GridCdf, y: &GridCdf| -> Result<GridCdf> {
        check_steps(x, y)?;
        convolve_window(x, y, 0, valid_points(x, y).min(len))
    };
    match n {
        0 => GridCdf::unit_step(0.0, f.step, len),
        1 => Ok(f.clone()),
        _ => {
            let binary = match powering {
                Powering::Auto => n >= POWERING_THRESHOLD,
                Powering::Always => true,
                Powering::Never => false,
            };
            if binary {
                let mut result: Option<GridCdf> = None;
                let mut base = f.clone();
                let mut m = n;
                loop {
                    if m & 1 == 1 {
                        result = Some(match result {
                            None => base.clone(),
                            Some(r) => step_to(&r, &base)?,
                        });
                    }
                    m >>= 1;
                    if m == 0 {
                        break;
                    }
                    base = step_to(&base, &base)?;
                }
                Ok(result.expect("n >= 2 sets at least one bit"))
            } else {
                let mut acc = f.clone();
                for _ in 1..n {
                    acc = step_to(&acc, f)?;
                }
                Ok(acc)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{DurationModel, ReturnModel};

    fn uniform01(step: f64, horizon: f64) -> GridCdf {
        let n = (horizon / step).round() as usize + 1;
        discretize(&DurationModel::uniform(0.0, 1.0).unwrap(), 0.0, step, n).unwrap()
    }

    #[test]
    fn discretize_uniform_values() {
        let g = discretize(&DurationModel::uniform(0.0, 1.0).unwrap(), 0.0, 0.5, 5).unwrap();
        assert_eq!(g.values(), &[0.0, 0.5, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn discretize_exponential_reaches_one() {
        let g = discretize(&DurationModel::exponential(1.0).unwrap(), 0.0, 0.01, 2001).unwrap();
        assert!(g.values()[2000] >= 1.0 - 1e-8);
        assert!((g.last_node() - 20.0).abs() < 1e-12);
    }

    #[test]
    fn discretize_normal_left_tail() {
        let g = discretize(&ReturnModel::normal(0.0, 1.0).unwrap(), -8.0, 0.01, 1601).unwrap();
        assert!(g.values()[0] <= 1e-15);
    }

    #[test]
    fn discretize_rejects_bad_grid() {
        let m = DurationModel::exponential(1.0).unwrap();
        assert!(discretize(&m, 0.0, 0.0, 10).is_err());
        assert!(discretize(&m, 0.0, 0.1, 1).is_err());
    }

    #[test]
    fn eval_interpolates() {
        let g = GridCdf::new(0.0, 1.0, vec![0.0, 0.5, 1.0]).unwrap();
        assert_eq!(g.eval(-0.5), 0.0);
        assert_eq!(g.eval(0.5), 0.25);
        assert_eq!(g.eval(1.0), 0.5);
        assert_eq!(g.eval(7.0), 1.0);
    }

    #[test]
    fn new_rejects_decreasing_values() {
        assert!(GridCdf::new(0.0, 1.0, vec![0.0, 0.6, 0.5]).is_err());
        assert!(GridCdf::new(0.0, 1.0, vec![0.0, 1.5]).is_err());
        let g = GridCdf::new(0.0, 1.0, vec![0.0, 0.5, 0.5 - 1e-13, 1.0 + 1e-13]).unwrap();
        assert_eq!(g.values(), &[0.0, 0.5, 0.5, 1.0]);
    }

    #[test]
    fn uniform_sum_triangular_at_one() {
        let f = uniform01(0.001, 2.0);
        let w = convolve(&f, &f).unwrap();
        assert!((w.eval(1.0) - 0.5).abs() < 1e-12);
        // triangular CDF: w^2 / 2 on [0, 1], 1 - (2 - w)^2 / 2 on [1, 2]
        for &x in &[0.3, 0.77, 1.4, 1.9] {
            let exact = if x <= 1.0 {
                x * x / 2.0
            } else {
                1.0 - (2.0 - x) * (2.0 - x) / 2.0
            };
            assert!((w.eval(x) - exact).abs() < 1e-6, "x={x}");
        }
    }

    #[test]
    fn unit_step_is_identity() {
        let f = discretize(&DurationModel::weibull(1.5, 1.0).unwrap(), 0.0, 0.01, 301).unwrap();
        let delta = GridCdf::unit_step(0.0, 0.01, 301).unwrap();
        for w in [convolve(&f, &delta).unwrap(), convolve(&delta, &f).unwrap()] {
            for i in 0..f.len() {
                assert!((w.values()[i] - f.values()[i]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn exponential_pair_matches_gamma2() {
        let f = discretize(&DurationModel::exponential(1.0).unwrap(), 0.0, 0.001, 3001).unwrap();
        let w = convolve(&f, &f).unwrap();
        // Oracle: Gamma(2, 1) CDF, 1 - 2/e at w = 1.
        assert!((w.eval(1.0) - 0.264_241_117_657_115).abs() < 1e-6);
        assert_eq!(w.len(), f.len());
    }

    #[test]
    fn mismatched_steps_and_horizon_errors() {
        let f = uniform01(0.01, 1.0);
        let g = uniform01(0.02, 1.0);
        assert!(matches!(
            convolve(&f, &g),
            Err(PricerError::StepMismatch { .. })
        ));
        let shifted = GridCdf::unit_step(5.0, 0.01, 10).unwrap();
        assert!(matches!(
            convolve_truncated(&f, &shifted, 1.0),
            Err(PricerError::BeyondHorizon { .. })
        ));
    }

    #[test]
    fn nfold_edge_cases() {
        let f = discretize(&DurationModel::exponential(1.0).unwrap(), 0.0, 0.001, 5001).unwrap();
        let zero = nfold(&f, 0).unwrap();
        assert!(zero.values().iter().all(|&v| v == 1.0));
        assert_eq!(nfold(&f, 1).unwrap(), f);
        let three = nfold(&f, 3).unwrap();
        // Erlang(3, 1) CDF at t = 2: 1 - e^{-2}(1 + 2 + 2)
        let exact = 1.0 - (-2.0f64).exp() * 5.0;
        assert!((three.eval(2.0) - exact).abs() < 1e-6);
    }

    #[test]
    fn binary_powering_agrees_with_iteration() {
        let f = discretize(
            &DurationModel::lognormal(-1.0, 0.5).unwrap(),
            0.0,
            0.002,
            2001,
        )
        .unwrap();
        let a = nfold_with(&f, 9, Powering::Always).unwrap();
        let b = nfold_with(&f, 9, Powering::Never).unwrap();
        let worst = a
            .values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-5, "worst {worst}");
    }

    #[test]
    fn refinement_is_second_order() {
        // Weibull(1.5) pair at w = 1; differences shrink ~4x per halving.
        let d = DurationModel::weibull(1.5, 1.0).unwrap();
        let at = |h: f64| {
            let f = discretize(&d, 0.0, h, (2.0 / h).round() as usize + 1).unwrap();
            convolve(&f, &f).unwrap().eval(1.0)
        };
        let v: Vec<f64> = [0.04, 0.02, 0.01, 0.005].iter().map(|&h| at(h)).collect();
        for w in v.windows(3) {
            let ratio = (w[0] - w[1]) / (w[1] - w[2]);
            assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
        }
    }

    proptest::proptest! {
        #[test]
        fn pre_clamp_dips_are_rounding_level(
            shape in 0.5f64..3.0,
            scale in 0.1f64..2.0,
            rate in 0.2f64..5.0,
        ) {
            let h = 0.01;
            let f = discretize(&DurationModel::weibull(shape, scale).unwrap(), 0.0, h, 401).unwrap();
            let g = discretize(&DurationModel::exponential(rate).unwrap(), 0.0, h, 401).unwrap();
            let raw = convolve_raw(&f, &g, 0, 401);
            let dip = raw.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max);
            proptest::prop_assert!(dip <= 10.0 * f64::EPSILON, "dip {}", dip);
        }
    }
}
