use thiserror::Error;

/// Errors produced by the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-numeric or non-finite cells in rows {rows:?}")]
    NonNumericRows { rows: Vec<usize> },

    #[error("k must be < n (k = {k}, n = {n})")]
    KTooLarge { k: usize, n: usize },

    #[error("zero-norm extreme at row {row}")]
    ZeroNormExtreme { row: usize },

    #[error("need at least two extremes, got {0}")]
    TooFewExtremes(usize),

    #[error("non-finite entry in matrix")]
    NonFinite,

    #[error("matrix is not positive semidefinite: eigenvalue {0:e} below tolerance")]
    NotPsd(f64),

    #[error("degenerate spectrum: leading eigenvalue {0:e} is not positive")]
    DegenerateSpectrum(f64),

    #[error("nonpositive eigenvalue in criterion range: index {index} has value {value:e}")]
    NonpositiveEigenvalue { index: usize, value: f64 },

    #[error("criterion regime mismatch: {0}")]
    RegimeMismatch(String),

    #[error("c = 1 excluded (d = k = {0})")]
    UnitAspectRatio(usize),

    #[error("candidate dimension out of range: {0}")]
    CandidateOutOfRange(String),

    #[error("phi_c undefined at or below 1 (x = {0})")]
    PhiDomain(f64),

    #[error("not a distant spike: xi = {xi} <= 1 + sqrt(c) = {threshold}")]
    NotDistant { xi: f64, threshold: f64 },

    #[error("modified gap applies to c > 1 only (c = {0})")]
    ModifiedGapDomain(f64),

    #[error("quantile outside continuous range: alpha = {alpha} not in ({lower}, 1)")]
    QuantileRange { alpha: f64, lower: f64 },

    #[error("invalid model spec: {0}")]
    InvalidModel(String),

    #[error("replication {replication}: {source}")]
    Replication {
        replication: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// `true` for failures caused by malformed or unreadable input, as opposed
    /// to numeric or regime failures on otherwise valid input.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::InvalidInput(_)
            | Error::NonNumericRows { .. }
            | Error::KTooLarge { .. }
            | Error::InvalidModel(_)
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => true,
            Error::Replication { source, .. } => source.is_input_error(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
