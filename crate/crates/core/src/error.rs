use thiserror::Error;

/// Errors raised by the surface model, the integration oracle and the
/// estimators built on top of them.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LisError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("terminal inside the sphere: tau = {tau} < 1")]
    InsideSphere { tau: f64 },

    #[error("surface point not visible: theta = {theta} exceeds visibility angle {theta0}")]
    NotVisible { theta: f64, theta0: f64 },

    #[error("quadrature budget of {max_evals} evaluations exhausted (estimate {estimate}, error {error})")]
    BudgetExhausted {
        max_evals: usize,
        estimate: f64,
        error: f64,
    },

    #[error("terminal touches the disk plane (tau * cos(theta) = {value})")]
    SingularIntegrand { value: f64 },

    #[error("no tau in [{lo}, {hi}] can explain the measured RSS series")]
    NoRoot { lo: f64, hi: f64 },

    #[error("root bracket [{lo}, {hi}] does not straddle a sign change")]
    NotBracketed { lo: f64, hi: f64 },

    #[error("boundary detection failed: no ring exceeds the threshold {threshold}")]
    DetectionFailure { threshold: f64 },

    #[error("reflector caps overlap: separation {separation} rad <= {rx_half} + {tx_half}")]
    CapOverlap {
        separation: f64,
        rx_half: f64,
        tx_half: f64,
    },
}

pub type Result<T> = std::result::Result<T, LisError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> LisError {
    LisError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn ensure_finite(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(invalid(name, format!("must be finite, got {value}")))
    }
}
