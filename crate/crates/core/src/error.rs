use crate::glm::FitStatus;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,
    #[error("inconsistent record arity: record {record} has {found} fields, expected {expected}")]
    RaggedRecord {
        record: usize,
        found: usize,
        expected: usize,
    },
    #[error("empty file")]
    EmptyFile,
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("column `{0}` is categorical where a numeric column is required")]
    NotNumeric(String),
    #[error("level `{level}` does not occur in column `{column}`")]
    UnknownLevel { column: String, level: String },
    #[error("factor `{0}` has a single level")]
    SingleLevelFactor(String),
    #[error("degenerate column `{0}`")]
    DegenerateColumn(String),
    #[error("empty candidate set")]
    EmptyCandidates,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid response: {0}")]
    InvalidResponse(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("model fit failed with status {0}")]
    FitFailed(FitStatus),
    #[error("unstable posterior: {failed} of {requested} draws failed ({detail})")]
    UnstablePosterior {
        failed: usize,
        requested: usize,
        detail: String,
    },
    #[error("too few draws to summarize: {0} (need at least 20)")]
    TooFewDraws(usize),
    #[error("non-finite value among draws")]
    NonFinite,
    #[error("draws have zero standard deviation")]
    ZeroSpread,
    #[error("population size {population} is smaller than sample size {sample}")]
    PopulationTooSmall { population: usize, sample: usize },
    #[error("invalid report: {0}")]
    InvalidReport(String),
    #[error("checksum mismatch for bundled dataset `{0}`")]
    Checksum(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Failures that come from the numerics rather than from bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::FitFailed(_)
                | Error::UnstablePosterior { .. }
                | Error::TooFewDraws(_)
                | Error::NonFinite
                | Error::ZeroSpread
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
