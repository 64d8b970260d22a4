use coref_core::{DiffError, SgmlError};
use thiserror::Error;

use crate::store::Stage;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown project {0:?}")]
    UnknownProject(String),
    #[error("unknown document {0:?}")]
    UnknownDocument(String),
    #[error("unknown annotator {0:?}")]
    UnknownAnnotator(String),
    #[error("revision conflict: expected {expected}, current {current}")]
    RevisionConflict { expected: u64, current: u64 },
    #[error("operation {op} not allowed in stage {stage:?}")]
    WrongStage { stage: Stage, op: &'static str },
    #[error("document {0:?} already exists")]
    ImportConflict(String),
    #[error("{file}: {source}")]
    ParseError {
        file: String,
        #[source]
        source: SgmlError,
    },
    #[error("invalid markables: {0}")]
    SpanError(#[source] SgmlError),
    #[error("unknown mention {0:?}")]
    UnknownMention(String),
    #[error("invalid link: {0}")]
    InvalidLink(String),
    #[error("unknown discrepancy {0:?}")]
    UnknownDiscrepancy(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Analysis(#[from] DiffError),
    #[error("stored data is corrupt: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ServiceError {
    /// Stable machine-readable name used in HTTP error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            Self::UnknownProject(_) => "UnknownProject",
            Self::UnknownDocument(_) => "UnknownDocument",
            Self::UnknownAnnotator(_) => "UnknownAnnotator",
            Self::RevisionConflict { .. } => "RevisionConflict",
            Self::WrongStage { .. } => "WrongStage",
            Self::ImportConflict(_) => "ImportConflict",
            Self::ParseError { .. } => "ParseError",
            Self::SpanError(_) => "SpanError",
            Self::UnknownMention(_) => "UnknownMention",
            Self::InvalidLink(_) => "InvalidLink",
            Self::UnknownDiscrepancy(_) => "UnknownDiscrepancy",
            Self::Invalid(_) => "Invalid",
            Self::Analysis(_) => "AnalysisError",
            Self::Corrupt(_) => "Corrupt",
            Self::Io(_) => "Io",
        }
    }
}

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;
