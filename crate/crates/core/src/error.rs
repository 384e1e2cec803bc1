use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A floating-point computation would leave the representable range.
    #[error("range error: {message} (maximum usable n_max for this efficiency is {max_n_max})")]
    Range { message: String, max_n_max: usize },

    /// The neglected photon-number tail exceeds the truncation budget.
    #[error("truncation error: {message} (required truncation about {required})")]
    Truncation { message: String, required: usize },

    /// The requested heralding outcome has (numerically) zero probability.
    #[error("outcome unreachable: success probability {0:e} is below 1e-300")]
    Unreachable(f64),

    /// A measured point lies outside the success-probability range of a benchmark curve.
    #[error("out of benchmark range: {0}")]
    OutOfBenchmarkRange(String),

    /// Reading or writing a cache file failed.
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_efficiency(eta: f64, what: &str) -> Result<()> {
    if eta.is_finite() && eta > 0.0 && eta <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{what} must lie in (0, 1], got {eta}"
        )))
    }
}
