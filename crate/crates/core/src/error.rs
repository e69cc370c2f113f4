use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("column {index} has l2 norm {norm}, expected 1 within {tol:e}")]
    NonUnitColumn { index: usize, norm: f64, tol: f64 },

    #[error("column {index} is zero and cannot be normalised")]
    ZeroColumn { index: usize },

    #[error(
        "power iteration did not converge after {iterations} iterations \
         (last estimate {estimate}, residual {residual:e})"
    )]
    NotConverged {
        iterations: usize,
        estimate: f64,
        residual: f64,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("outside the domain of the bound: {0}")]
    Domain(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("summand {index} violates the instance contract: {message}")]
    InvalidSummand { index: usize, message: String },
}

impl Error {
    /// True for failures of an iterative numerical routine, as opposed to bad
    /// input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NotConverged { .. })
    }
}
