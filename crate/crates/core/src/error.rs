use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter `{name}` = {value} is outside its valid range {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("integration produced a non-finite state at step {step} (t = {time})")]
    IntegrationDiverged { step: usize, time: f64 },

    #[error("target capability {target} is unreachable: the growth rate vanishes at H = {stalled_at}")]
    Unreachable { target: f64, stalled_at: f64 },

    #[error("target capability {target} not reached within the horizon t = {horizon}")]
    ExceedsHorizon { target: f64, horizon: f64 },

    #[error("K* maximum gradient lies on the grid endpoint K = {k} (|dH/dK| = {gradient})")]
    EndpointMaximum { k: f64, gradient: f64 },

    #[error("invalid sweep specification: {0}")]
    InvalidSweep(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("singular design matrix in {0}")]
    SingularDesign(&'static str),

    #[error("fits were computed on different observation sets ({0})")]
    MismatchedObservations(String),

    #[error("missing benchmark domain {0}")]
    MissingDomain(String),
}

pub(crate) fn check_finite(value: f64, context: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite {
            context: context.to_string(),
        })
    }
}

pub(crate) fn check_range(
    name: &'static str,
    value: f64,
    lo: f64,
    hi: f64,
    range: &'static str,
) -> Result<()> {
    if value.is_finite() && value >= lo && value <= hi {
        Ok(())
    } else {
        Err(Error::OutOfRange { name, value, range })
    }
}
