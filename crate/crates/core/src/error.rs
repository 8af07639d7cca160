use thiserror::Error;

/// Errors raised by the numerical core.
///
/// Every variant carries enough context for the command-line front end to
/// print a message naming the violated precondition.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed input data (non-stochastic rows, negative entries, ...).
    #[error("{0}")]
    Validation(String),

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    /// A scalar parameter outside the domain of the operation.
    #[error("{0}")]
    Domain(String),

    /// An explicit materialization or enumeration cap was exceeded.
    #[error("{what}: {size} exceeds the cap of {cap}; {hint}")]
    CapExceeded {
        what: &'static str,
        size: f64,
        cap: f64,
        hint: &'static str,
    },

    #[error("{solver} did not converge within {iterations} iterations (best certificate gap {gap:e})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        gap: f64,
    },

    /// A parameter inequality required by a single-shot achievability bound failed.
    #[error("parameter constraint violated: {0}")]
    Constraint(String),

    /// The channel is degenerate for the requested quantity.
    #[error("degenerate channel: {0}")]
    Degenerate(String),

    /// A theorem hypothesis is not met (e.g. zero dispersion).
    #[error("hypothesis unmet: {0}")]
    Hypothesis(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}

pub(crate) fn check_dim(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { what, expected, found })
    }
}
