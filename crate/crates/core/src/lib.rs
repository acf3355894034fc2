//! Corpus curation for domain- and task-adaptive pretraining.
//!
//! - [`corpus`]: documents, sentence splitting, tokenization, packing, dedup, sampling
//! - [`vocab`]: top-K domain vocabularies and their overlap matrix
//! - [`embed`]: TF-IDF + signed random projection sentence embeddings
//! - [`select`]: exact cosine kNN / random selection and corpus assembly
//! - [`mask`]: per-epoch token masking streams
//! - [`lm`]: n-gram language models and cross-domain loss matrices
//! - [`plan`]: pretraining step accounting
//! - [`pipeline`]: everything above wired into one reproducible run

pub mod config;
pub mod corpus;
pub mod demo;
pub mod embed;
pub mod error;
pub mod io;
pub mod lm;
pub mod mask;
pub mod pipeline;
pub mod plan;
pub mod rng;
pub mod select;
pub mod vocab;

pub use error::{Error, Result};
