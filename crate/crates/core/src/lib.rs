//! Text simplification as a tool for NLP pipelines.
//!
//! The crate covers two uses of a sentence simplifier: rewriting evaluation
//! inputs before they reach a model, and enlarging a training set with
//! simplified copies of existing examples. Around those sit the pieces the
//! pipeline needs to be trustworthy:
//!
//! * [`metrics`]: tokenizer, sentence BLEU and original-vs-simplified
//!   divergence reports.
//! * [`dataset`]: relation-extraction, NLI and generic record types with
//!   validating file adapters.
//! * [`backend`]: the [`backend::Simplifier`] trait plus rule, child-process
//!   and HTTP implementations.
//! * [`preservation`]: the entity-preservation check for relation examples.
//! * [`augment`]: seeded sampling and the append / swap /
//!   replace-if-preserved strategies, plus prediction-time preparation.

pub mod augment;
pub mod backend;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod preservation;

pub use error::{AugmentError, BackendError, DatasetError, PlanError};
