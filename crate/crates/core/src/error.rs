use thiserror::Error;

/// Errors raised across the toolkit.
///
/// Each variant maps onto one CLI exit code class, see [`Error::exit_code`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    Validation { field: &'static str, reason: String },

    #[error("infeasible design: gamma*h*t_f = {product:.6} < pi; t_f must be ≥ {min_tf:.3} t_0")]
    Infeasible { product: f64, min_tf: f64 },

    #[error("time {t} outside pulse interval [0, {tf}]")]
    OutOfRange { t: f64, tf: f64 },

    #[error("polar angle {theta} too close to a pole for the spherical equations")]
    Pole { theta: f64 },

    #[error("non-finite state at step {step} of pulse {pulse} (t = {t})")]
    NonFinite { pulse: usize, step: usize, t: f64 },
}

impl Error {
    pub(crate) fn validation(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Validation {
            field,
            reason: reason.into(),
        }
    }

    /// Process exit code: 1 validation, 2 feasibility, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation { .. } | Error::OutOfRange { .. } => 1,
            Error::Infeasible { .. } => 2,
            Error::Pole { .. } | Error::NonFinite { .. } => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
