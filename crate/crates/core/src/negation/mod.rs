//! Rule-based construction of logical and semi-logical negations.

mod batch;
mod engine;
pub mod lexicon;
pub mod parse;
pub mod verbs;

use alloc::string::String;

use serde::{Deserialize, Serialize};

pub use batch::{batch_negate, BatchOptions, BatchOutput, BatchReport, CueCount, Rejection};
pub use engine::{NegationEngine, NegationResult, RewriteStep, AUXILIARIES};
pub use lexicon::{CueCategory, CueLexicon, CueLexiconEntry, InsertionRule};
pub use parse::{parse_sketch, ParseSketch, Tag, Tense};
pub use verbs::VerbLexicon;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NegationError {
    #[error("unparsable event: {0}")]
    UnparsableEvent(String),
    #[error("compound event with a second clause")]
    CompoundEventRejected,
    #[error("event is already negated (cue `{0}`)")]
    AlreadyNegated(String),
    #[error("cue `{cue}` does not fit this event: {reason}")]
    CueIncompatible { cue: String, reason: String },
}

/// Error variant without payload, used for rejection histograms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RejectionKind {
    UnparsableEvent,
    CompoundEventRejected,
    AlreadyNegated,
    CueIncompatible,
}

impl RejectionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectionKind::UnparsableEvent => "UnparsableEvent",
            RejectionKind::CompoundEventRejected => "CompoundEventRejected",
            RejectionKind::AlreadyNegated => "AlreadyNegated",
            RejectionKind::CueIncompatible => "CueIncompatible",
        }
    }
}

impl NegationError {
    pub fn kind(&self) -> RejectionKind {
        match self {
            NegationError::UnparsableEvent(_) => RejectionKind::UnparsableEvent,
            NegationError::CompoundEventRejected => RejectionKind::CompoundEventRejected,
            NegationError::AlreadyNegated(_) => RejectionKind::AlreadyNegated,
            NegationError::CueIncompatible { .. } => RejectionKind::CueIncompatible,
        }
    }
}
