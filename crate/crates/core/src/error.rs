use alloc::string::String;

use crate::negation::NegationError;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("unknown relation type `{0}`")]
    UnknownRelation(String),
    #[error("unknown polarity `{0}`")]
    UnknownPolarity(String),
    #[error("unknown split `{0}`")]
    UnknownSplit(String),
    #[error("{field} is empty")]
    EmptyText { field: &'static str },
    #[error("{polarity} event `{head}` has no source head")]
    MissingSourceHead { head: String, polarity: &'static str },
    #[error("source head `{0}` is not in the graph")]
    UnresolvedSourceHead(String),
    #[error("event `{head}` appears with conflicting metadata")]
    ConflictingEvent { head: String },
    #[error("knowledge graph is empty")]
    EmptyGraph,
    #[error("training data has a single class (label {0})")]
    SingleClass(u8),
    #[error("training data is empty")]
    EmptyTrainingSet,
    #[error("no label for ({head}, {relation}, {tail})")]
    MissingLabel {
        head: String,
        relation: &'static str,
        tail: String,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("external model failure: {0}")]
    External(String),
    #[error(transparent)]
    Negation(#[from] NegationError),
}
