//! Error type shared by the whole crate.
//!
//! Every fallible operation returns [`Error`]. Variants carry enough
//! context to name the offending value, row or timestamp, and each variant
//! maps to a coarse [`ErrorKind`] so binaries can translate failures into
//! distinct exit codes without matching on individual variants.

use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Coarse classification of an [`Error`], used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Invalid parameters or parameter combinations supplied by the caller.
    Config,
    /// Input data that could not be ingested (parse failures, ordering or
    /// spacing violations, missing files).
    Ingestion,
    /// Operations invoked on state that cannot serve them, and failures
    /// arising mid-computation (corrupt snapshots, I/O during writes).
    Runtime,
}

/// Unified error for domain, histogram, clustering, estimation, evaluation
/// and I/O failures.
#[derive(Debug, Error)]
pub enum Error {
    /// Domain construction with a malformed range or too few bins.
    #[error("invalid domain: need finite p_min < p_max and at least 2 bins, got [{p_min}, {p_max}] with {n_bins} bins")]
    InvalidDomain {
        p_min: f64,
        p_max: f64,
        n_bins: usize,
    },

    /// A value that must be finite was NaN or infinite.
    #[error("non-finite {what}: {value}")]
    NonFinite { what: &'static str, value: f64 },

    /// Confidence level outside the open interval (0, 1).
    #[error("confidence level must lie strictly between 0 and 1, got {alpha}")]
    InvalidAlpha { alpha: f64 },

    /// A parameter failed validation.
    #[error("invalid {what}: {why}")]
    InvalidParameter { what: &'static str, why: String },

    /// Quantile query against a histogram that has never been updated.
    #[error("histogram holds no data")]
    EmptyHistogram,

    /// An operation that requires an untouched histogram was applied to one
    /// that already holds mass.
    #[error("histogram is already seeded; batch seeding requires a fresh histogram")]
    AlreadySeeded,

    /// Training data shorter than the operation needs.
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    /// Estimate requested before the estimator has seen any sample.
    #[error("estimator has not observed any sample yet")]
    NotReady,

    /// Observation timestamps must be strictly increasing.
    #[error("timestamp {got_ms} ms does not advance past {last_ms} ms")]
    NonMonotonicTimestamp { got_ms: i64, last_ms: i64 },

    /// A CSV row that could not be parsed.
    #[error("{path}:{line}: {why}")]
    MalformedRow {
        path: PathBuf,
        line: usize,
        why: String,
    },

    /// Input file with no data rows.
    #[error("{path}: no data rows")]
    EmptyInput { path: PathBuf },

    /// Time series too short to establish a sampling period.
    #[error("{path}: need at least 2 rows to establish the sampling period")]
    PeriodUndetermined { path: PathBuf },

    /// Non-uniform sample spacing in an ingested series.
    #[error("{path}: expected {expected_ms} ms spacing but found {found_ms} ms at timestamp {at_ms} ms")]
    NonUniformSpacing {
        path: PathBuf,
        expected_ms: i64,
        found_ms: i64,
        at_ms: i64,
    },

    /// Sampling period of the data does not match the period the estimator
    /// was configured for.
    #[error("sampling period mismatch: estimator expects {expected_ms} ms, data has {found_ms} ms")]
    PeriodMismatch { expected_ms: i64, found_ms: i64 },

    /// Downsampling target that is not an integer multiple of the source.
    #[error("target period {target_ms} ms is not a positive integer multiple of source period {source_ms} ms")]
    IncompatiblePeriods { source_ms: i64, target_ms: i64 },

    /// Snapshot bytes that are not a snapshot, or of an unsupported version.
    #[error("snapshot format error: {why}")]
    SnapshotFormat { why: String },

    /// Snapshot whose checksum does not match its payload.
    #[error("snapshot checksum mismatch; file is corrupt")]
    SnapshotChecksum,

    /// Underlying I/O failure, annotated with the path involved.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl Error {
    /// Classifies the error for exit-code mapping.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidDomain { .. }
            | Error::InvalidAlpha { .. }
            | Error::InvalidParameter { .. }
            | Error::TooFewSamples { .. }
            | Error::IncompatiblePeriods { .. } => ErrorKind::Config,

            Error::NonFinite { .. }
            | Error::MalformedRow { .. }
            | Error::EmptyInput { .. }
            | Error::PeriodUndetermined { .. }
            | Error::NonUniformSpacing { .. }
            | Error::PeriodMismatch { .. }
            | Error::NonMonotonicTimestamp { .. } => ErrorKind::Ingestion,

            Error::EmptyHistogram
            | Error::AlreadySeeded
            | Error::NotReady
            | Error::SnapshotFormat { .. }
            | Error::SnapshotChecksum
            | Error::Io { .. } => ErrorKind::Runtime,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Crate-wide result alias.
pub type Result<T, E = Error> = core::result::Result<T, E>;
