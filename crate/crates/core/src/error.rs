use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument is outside the domain of the function.
    #[error("{name} out of domain: {value}")]
    Domain { name: &'static str, value: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// An iterative solver did not converge.
    #[error("no convergence after {iterations} iterations: {what}")]
    NoConvergence { what: &'static str, iterations: u32 },

    /// A closed form hits a pole, e.g. the super-slot length when the
    /// channel is never busy.
    #[error("singular evaluation: {0}")]
    Singular(&'static str),

    /// A computed probability landed outside [0, 1].
    #[error("inconsistent result: {what} = {value}")]
    Inconsistent { what: &'static str, value: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    /// The tuner's target is not between the endpoint measurements.
    #[error("target {target} not bracketed by [{low}, {high}]")]
    Bracket { target: f64, low: f64, high: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_nonneg(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(Error::Domain { name, value })
    }
}

pub(crate) fn check_pos(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::Domain { name, value })
    }
}

pub(crate) fn check_unit(name: &'static str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::Domain { name, value })
    }
}
