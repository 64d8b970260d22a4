//! Coreference annotation toolkit.
//!
//! The crate covers the whole offline pipeline for MUC-style `COREF` markup:
//!
//! - [`sgml`]: parse and emit `<COREF ID=.. REF=.. MIN=..>` SGML into a base
//!   text with character-offset mentions and document zones.
//! - [`chains`]: close `REF` links into coreference chains.
//! - [`align`]: pair key mentions with response mentions, tolerating extent
//!   differences through the `MIN` head.
//! - [`score`]: model-theoretic (link-based) recall, precision and F.
//! - [`diff`]: enumerate and categorize disagreements between two annotations.
//! - [`report`]: tabular chain display (HTML) and score text reports.
//!
//! All operations are pure functions over value types.

pub mod align;
pub mod chains;
pub mod diff;
pub mod error;
pub mod report;
pub mod score;
pub mod sgml;
mod text;

pub use align::{align, align_symmetric, resolve_min, MatchKind, MentionAlignment};
pub use chains::{build_chains, Chain, ChainSet};
pub use diff::{
    auto_classify, diff, tally, Category, CategoryRow, CategoryTally, Discrepancy,
    DiscrepancyKind, DiffReport, PronounLexicon,
};
pub use error::{AlignError, ChainError, DiffError, ScoreError, SgmlError};
pub use report::{chain_table, chain_table_with, render_html, render_score_text, ChainTable};
pub use score::{f_measure, score, Fraction, ScoreReport};
pub use sgml::{
    mention_text, parse_muc_sgml, segment_zones, serialize_muc_sgml, AnnotatedDocument,
    CorefType, Mention, Span, Zone, ZoneKind,
};
