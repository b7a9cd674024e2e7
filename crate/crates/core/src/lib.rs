//! Cross-lingual relation extraction by bilingual word-embedding mapping.
//!
//! A relation classifier is trained on source-language text over frozen
//! source embeddings. Target-language sentences are then classified by
//! projecting their word vectors into the source space with a linear map
//! learned from a small bilingual dictionary.

pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod mapping;
pub mod metrics;
pub mod numeric;
pub mod pipeline;
pub mod remodel;

pub use error::{Error, Result};
