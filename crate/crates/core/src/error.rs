use thiserror::Error;

/// Errors produced by the analytical and simulation layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error in {func}: {detail}")]
    Domain { func: &'static str, detail: String },

    /// A series did not reach its tolerance within the term budget.
    #[error("series in {func} truncated after {terms} terms (partial {partial:e}, tail bound {tail_bound:e})")]
    Truncation {
        func: &'static str,
        terms: usize,
        partial: f64,
        tail_bound: f64,
    },

    /// No analytic continuation available for the requested argument.
    #[error("unsupported argument in {func}: {detail}")]
    UnsupportedArgument { func: &'static str, detail: String },

    /// Adaptive quadrature failed to meet its tolerance.
    #[error("quadrature did not converge (estimate {estimate:e}, error {error:e})")]
    Quadrature { estimate: f64, error: f64 },

    /// A queueing stability condition is violated; `margin` is the (non-positive) margin.
    #[error("stability condition violated in {func}: margin {margin:e}")]
    Stability { func: &'static str, margin: f64 },

    /// An invalid parameter record.
    #[error("invalid {what}: {detail}")]
    InvalidConfig { what: &'static str, detail: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("i/o error on {path}: {detail}")]
    Io { path: String, detail: String },
}

impl Error {
    /// Short machine-readable category, used in output tables and CLI exit codes.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Domain { .. } => "domain",
            Error::Truncation { .. } => "truncation",
            Error::UnsupportedArgument { .. } => "unsupported",
            Error::Quadrature { .. } => "quadrature",
            Error::Stability { .. } => "stability",
            Error::InvalidConfig { .. } => "config",
            Error::Empty(_) => "empty",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn domain(func: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            func,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<String>, err: impl std::fmt::Display) -> Self {
        Error::Io {
            path: path.into(),
            detail: err.to_string(),
        }
    }

    pub(crate) fn config(what: &'static str, detail: impl Into<String>) -> Self {
        Error::InvalidConfig {
            what,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
