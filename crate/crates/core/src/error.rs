use thiserror::Error;

/// Errors raised by the pricing library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PricerError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("moment generating function diverges at 1: {0}")]
    MgfDiverges(String),

    #[error("grid step mismatch: {left} vs {right}")]
    StepMismatch { left: f64, right: f64 },

    #[error("convolution output lies entirely beyond the horizon {horizon}")]
    BeyondHorizon { horizon: f64 },

    #[error("tail not converged: more than {cap} counting terms needed (remaining mass {remaining:.3e})")]
    TailNotConverged { cap: usize, remaining: f64 },

    #[error("conditioning event has negligible probability ({probability:.3e} < floor {floor:.1e}) for t={t}, n_t={n_t}")]
    NegligibleConditioning {
        t: f64,
        n_t: usize,
        probability: f64,
        floor: f64,
    },

    #[error("grid too narrow: component {component} leaks mass {escaped:.3e} outside half-width {half_width}; required half-width about {required}")]
    GridTooNarrow {
        component: usize,
        escaped: f64,
        half_width: f64,
        required: f64,
    },

    #[error("conditioning too rare, increase paths (acceptance rate {rate:.3e})")]
    ConditioningTooRare { rate: f64 },

    #[error("fit did not converge: {0}")]
    FitNotConverged(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, PricerError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> PricerError {
    PricerError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
