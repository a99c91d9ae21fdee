use thiserror::Error;

/// Errors produced by the interval-data routines.
///
/// Validation problems found while scanning a dataset are reported as data
/// (see [`crate::interval::Violation`]); this type is for operations that
/// cannot produce a meaningful result.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid latent distribution: {0}")]
    InvalidLatent(String),

    #[error("zero-variance latent: {0}")]
    ZeroVarianceLatent(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("latent distributions differ in dimension {dim}; use the per-dimension general distance")]
    LatentMismatch { dim: usize },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("not enough observations: need at least {needed}, found {found}")]
    TooFewObservations { needed: usize, found: usize },

    #[error("zero variance in variable '{0}'")]
    ZeroVariance(String),

    #[error("moment condition violated: sample variance {variance} >= mean*(1-mean) = {bound}")]
    MomentCondition { variance: f64, bound: f64 },

    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("values outside interval [{lower}, {upper}] at positions {positions:?}")]
    OutsideInterval {
        lower: f64,
        upper: f64,
        positions: Vec<usize>,
    },

    #[error("missing latent specification for variable '{0}'")]
    MissingSpec(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(String),

    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
        Error::Parse {
            line,
            message: e.to_string(),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse {
            line: e.line(),
            message: e.to_string(),
        }
    }
}

impl Error {
    /// Stable snake_case name of the variant, for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::InvalidLatent(_) => "invalid_latent",
            Error::ZeroVarianceLatent(_) => "zero_variance_latent",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::LatentMismatch { .. } => "latent_mismatch",
            Error::Empty(_) => "empty",
            Error::TooFewObservations { .. } => "too_few_observations",
            Error::ZeroVariance(_) => "zero_variance",
            Error::MomentCondition { .. } => "moment_condition",
            Error::InvalidFrame(_) => "invalid_frame",
            Error::OutsideInterval { .. } => "outside_interval",
            Error::MissingSpec(_) => "missing_spec",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
            Error::Numeric(_) => "numeric",
        }
    }

    /// True when the input was well formed but the computation has no
    /// meaningful result, as opposed to a validation failure.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::ZeroVarianceLatent(_) | Error::ZeroVariance(_) | Error::MomentCondition { .. } | Error::Numeric(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
