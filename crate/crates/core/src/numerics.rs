use crate::distributions::Powering;
use crate::error::{invalid, Result};
use crate::martingale::LogGridSpec;

/// Discretization and truncation controls shared by every analytic routine.
#[derive(Debug, Clone, PartialEq)]
pub struct Numerics {
    /// Target step of the time grid, seconds. Each horizon uses the largest
    /// step not exceeding this that divides it evenly.
    pub h_time: f64,
    /// Log-price grid used for terminal laws.
    pub log_grid: LogGridSpec,
    /// Counting laws are truncated once the remaining mass drops below this.
    pub eps_tail: f64,
    /// Hard cap on the counting index.
    pub max_count: usize,
    /// Smallest acceptable probability of the conditioning event `{N(t) = n_t}`.
    pub denominator_floor: f64,
    /// Use the exponential (Poisson / memoryless) and normal closed forms.
    pub fast_paths: bool,
    pub powering: Powering,
    /// Length of the trading day, seconds; maturities must not exceed it.
    pub trading_day: f64,
    /// Re-price on a grid twice as coarse to estimate discretization error.
    pub error_estimate: bool,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            h_time: 1e-3,
            log_grid: LogGridSpec::default(),
            eps_tail: 1e-10,
            max_count: 100_000,
            denominator_floor: 1e-12,
            fast_paths: true,
            powering: Powering::Auto,
            trading_day: 8.5 * 3600.0,
            error_estimate: true,
        }
    }
}

impl Numerics {
    pub fn validate(&self) -> Result<()> {
        if !(self.h_time.is_finite() && self.h_time > 0.0) {
            return Err(invalid(
                "h_time",
                format!("must be > 0, got {}", self.h_time),
            ));
        }
        if !(self.eps_tail > 0.0 && self.eps_tail < 1.0) {
            return Err(invalid(
                "eps_tail",
                format!("must lie in (0, 1), got {}", self.eps_tail),
            ));
        }
        if !(self.denominator_floor >= 0.0) {
            return Err(invalid("denominator_floor", "must be >= 0"));
        }
        if !(self.trading_day.is_finite() && self.trading_day > 0.0) {
            return Err(invalid("trading_day", "must be > 0"));
        }
        if self.max_count == 0 {
            return Err(invalid("max_count", "must be >= 1"));
        }
        self.log_grid.validate()
    }

    /// Copy with every grid step doubled (used for the error estimate).
    pub fn coarsened(&self) -> Self {
        Self {
            h_time: 2.0 * self.h_time,
            log_grid: self.log_grid.coarsened(),
            error_estimate: false,
            ..self.clone()
        }
    }

    /// Copy with every grid step halved.
    pub fn refined(&self) -> Self {
        Self {
            h_time: 0.5 * self.h_time,
            log_grid: self.log_grid.refined(),
            ..self.clone()
        }
    }
}

/// Step and cell count of a uniform grid on `[0, horizon]` with step at most `h`.
pub(crate) fn time_grid(horizon: f64, h: f64) -> (f64, usize) {
    let cells = ((horizon / h) - 1e-9).ceil().max(1.0) as usize;
    (horizon / cells as f64, cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_grid_divides_horizon() {
        assert_eq!(time_grid(1.0, 0.1), (0.1, 10));
        let (step, cells) = time_grid(0.995, 0.01);
        assert_eq!(cells, 100);
        assert!((step * cells as f64 - 0.995).abs() < 1e-15);
        assert_eq!(time_grid(1e-6, 0.01).1, 1);
    }

    #[test]
    fn default_is_valid() {
        Numerics::default().validate().unwrap();
        let n = Numerics {
            eps_tail: 0.0,
            ..Numerics::default()
        };
        assert!(n.validate().is_err());
    }
}
