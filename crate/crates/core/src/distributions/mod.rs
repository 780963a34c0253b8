//! Duration and return laws, grid CDFs and the convolution engine.

mod duration;
mod empirical;
mod grid;
mod returns;

pub use duration::{DurationFamily, DurationModel};
pub use empirical::EmpiricalLaw;
pub(crate) use grid::clamp_monotone;
pub use grid::{
    convolve, convolve_truncated, convolve_window, discretize, nfold, nfold_with, GridCdf,
    Powering, POWERING_THRESHOLD,
};
pub use returns::{ReturnFamily, ReturnModel};

/// Anything with a cumulative distribution function on the real line.
pub trait Cdf: Sync {
    fn cdf(&self, x: f64) -> f64;
}

impl<F: Fn(f64) -> f64 + Sync> Cdf for F {
    fn cdf(&self, x: f64) -> f64 {
        self(x)
    }
}
