use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument fell outside the mathematical domain of an operation.
    #[error("domain error in {what}: {value}")]
    Domain { what: &'static str, value: f64 },

    /// Invalid structural input (lengths, grids, mismatched steps).
    #[error("invalid input: {0}")]
    Input(String),

    /// The requested (model, operation) pair is not supported.
    #[error("capability error: {0}")]
    Capability(String),

    /// An iterative solver ran out of budget.
    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    Solver { iterations: usize, residual: f64 },

    /// A numerical result could not be certified to the requested accuracy.
    #[error("accuracy target {target:e} not reached (achieved {achieved:e})")]
    Accuracy { target: f64, achieved: f64 },

    /// Time step too coarse for the requested propagation.
    #[error("step {h} exceeds stability limit {limit}")]
    Stability { h: f64, limit: f64 },

    /// A spectrum that should be non-negative is not.
    #[error("negative spectral density {worst:e} below clamp threshold {threshold:e}")]
    Positivity { worst: f64, threshold: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn check_finite(what: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Domain { what, value })
    }
}
