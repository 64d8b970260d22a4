//! Error types, one enum per pipeline stage.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SgmlError {
    #[error("COREF element ID={id:?} opened at offset {offset} is never closed")]
    UnclosedTag { id: String, offset: usize },
    #[error("</COREF> at offset {offset} has no matching open tag")]
    UnmatchedClose { offset: usize },
    #[error("malformed tag at offset {offset}: {reason}")]
    MalformedTag { offset: usize, reason: String },
    #[error("bad attribute at offset {offset}: {reason}")]
    BadAttribute { offset: usize, reason: String },
    #[error("duplicate mention id {0:?}")]
    DuplicateId(String),
    #[error("REF names unknown mention id {0:?}")]
    DanglingRef(String),
    #[error("mention {0:?} refers to itself")]
    SelfRef(String),
    #[error("mention {0:?} has an empty span")]
    EmptySpan(String),
    #[error("mention {id:?} span {start}..{end} lies outside the text (length {len})")]
    OutOfBounds {
        id: String,
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("spans of mentions {0:?} and {1:?} cross")]
    CrossingSpans(String, String),
    #[error("mentions {0:?} and {1:?} cover the same span")]
    DuplicateSpan(String, String),
    #[error("MIN {min:?} of mention {id:?} does not occur in its span")]
    MinNotInSpan { id: String, min: String },
    #[error("unknown mention id {0:?}")]
    UnknownMention(String),
    #[error("document violates its invariants: {0}")]
    InvariantViolation(Box<SgmlError>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChainError {
    #[error("REF names unknown mention id {0:?}")]
    DanglingRef(String),
    #[error("unknown mention id {0:?}")]
    UnknownMention(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlignError {
    #[error("key and response base texts differ (first difference at character {at})")]
    TextMismatch { at: usize },
    #[error("MIN {min:?} of mention {id:?} not found inside its span")]
    AmbiguousMin { id: String, min: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScoreError {
    #[error("alignment names mention {0:?} unknown to the chain sets")]
    AlignmentMismatch(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiffError {
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Chain(#[from] ChainError),
}
