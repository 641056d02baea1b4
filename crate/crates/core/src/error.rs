use thiserror::Error;

/// Errors raised by the model, noise generators, steppers and ensemble driver.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("unstable explicit update: {what} = {value} must be below {limit}")]
    Stability {
        what: &'static str,
        value: f64,
        limit: f64,
    },

    #[error("correlation trace under-resolved: dt = {dt} exceeds (hbar/Gamma)/10 = {limit}")]
    UnderResolved { dt: f64, limit: f64 },

    #[error("noise trace is not stationary: mean drift {drift:.3e} exceeds 5 sigma = {bound:.3e}")]
    NonStationary { drift: f64, bound: f64 },

    #[error("spectrum is not Lorentzian: relative residual {residual:.3} > 0.1")]
    NonLorentzian { residual: f64 },

    #[error("kinetic energy does not decay: {0}")]
    NonDecaying(String),

    #[error("state carries a {found} electronic variable but method {method} expects {expected}")]
    MethodMismatch {
        method: &'static str,
        expected: &'static str,
        found: &'static str,
    },

    #[error("current needs a two-lead bath, got {0} lead(s)")]
    SingleLead(usize),

    #[error("trajectory {index}: {source}")]
    Trajectory {
        index: u64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}
