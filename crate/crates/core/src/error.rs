use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// Each variant belongs to one of the CLI's exit-code classes; see
/// [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("config parse error: {0}")]
    Parse(String),

    #[error("invalid config: {0}")]
    Validation(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate covariance for pair ({alpha}, {beta}): v_a = {v_a}, v_b = {v_b}, c = {c}")]
    DegenerateCovariance {
        alpha: usize,
        beta: usize,
        v_a: f64,
        v_b: f64,
        c: f64,
    },

    #[error("kernel at layer {layer} is not PSD: smallest eigenvalue {min_eigenvalue:e} below -{tol:e}")]
    NotPsd {
        layer: usize,
        min_eigenvalue: f64,
        tol: f64,
    },

    #[error("insufficient data: need at least {needed} values, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("layer {0} was not recorded")]
    MissingLayer(usize),

    #[error("non-positive value {value} at width {width}; the metric hit the Monte Carlo noise floor")]
    NonPositive { width: usize, value: f64 },

    #[error("requested storage of {requested} values exceeds the cap of {cap}")]
    Resource { requested: usize, cap: usize },

    #[error("degenerate grid: points {0} and {1} coincide")]
    DegenerateGrid(usize, usize),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit code for the CLI: 1 for configuration problems, 2 for
    /// numerical failures, 3 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_)
            | Error::Validation(_)
            | Error::DimensionMismatch(_)
            | Error::Resource { .. }
            | Error::DegenerateGrid(..) => 1,
            Error::DegenerateCovariance { .. }
            | Error::NotPsd { .. }
            | Error::InsufficientData { .. }
            | Error::MissingLayer(_)
            | Error::NonPositive { .. } => 2,
            Error::Io { .. } => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
