//! Annotation project store and HTTP service for the two-stage
//! (markables, then links) coreference workflow.

pub mod error;
pub mod http;
pub mod store;

pub use error::ServiceError;
pub use http::{router, serve};
pub use store::{
    Agreement, AnnotationState, DocumentView, Link, NewProject, ProjectMeta, ProjectOptions, ProjectSummary,
    SourceFile, Stage, StateSummary, Store, StoreConfig, StoreDump,
};
