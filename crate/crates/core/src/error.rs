use std::path::PathBuf;

/// Errors produced by the scoring, fitting and resampling routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("write error: {0}")]
    Write(String),

    #[error("empty data: {0}")]
    EmptyData(String),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("covariance of cluster {cluster} is numerically singular")]
    SingularSigma { cluster: usize },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("not enough points: k = {k} exceeds n = {n}")]
    NotEnoughPoints { k: usize, n: usize },

    #[error("cluster {0} is empty")]
    EmptyCluster(usize),

    #[error("unsupported covariance model: {0}")]
    UnsupportedModel(String),

    #[error("criterion {criterion} is not applicable: {reason}")]
    NotApplicable {
        criterion: &'static str,
        reason: String,
    },

    #[error("degenerate scatter: within-cluster dispersion is zero")]
    DegenerateScatter,

    #[error("too many failed fits: {failures} of {total}")]
    TooManyFailures { failures: usize, total: usize },

    #[error("training fold of {size} points cannot support k = {k}")]
    FoldTooSmall { size: usize, k: usize },

    #[error("no applicable method for criterion {0}")]
    NoApplicableMethod(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn not_applicable(criterion: &'static str, reason: impl Into<String>) -> Self {
        Error::NotApplicable {
            criterion,
            reason: reason.into(),
        }
    }
}
