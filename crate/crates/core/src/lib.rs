// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod distributions;
pub mod error;
pub mod martingale;
pub mod montecarlo;
pub mod numerics;
pub mod par;
pub mod pricing;
pub mod renewal;
pub mod special;

pub use error::{PricerError, Result};
