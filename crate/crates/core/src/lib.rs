//! Negated-event commonsense knowledge toolkit.
//!
//! The crate turns affirmative `{head, relation, tail}` knowledge into negated
//! events, derives contrastive valid/invalid training data from paired events,
//! trains a plausibility discriminator that splits generated inferences into
//! valid and invalid sets, and evaluates those sets.
//!
//! Everything here is IO-free and builds without `std` (an allocator is
//! required). File formats, subprocess protocols and the command line live in
//! the companion `anion-forge` crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod contrast;
pub mod discriminator;
pub mod error;
pub mod eval;
pub mod generator;
pub mod kg;
pub mod negation;
pub mod synthetic;
pub mod text;

pub use error::{Error, Result};
pub use kg::{Event, KnowledgeGraph, KnowledgeTuple, Polarity, RelationType, Split};
