//! Static PDF malware triage.
//!
//! The pipeline runs raw bytes through a tolerant parser ([`pdf`]), maps the
//! parsed structure onto a fixed 48-feature vector ([`features`]),
//! standardizes the feature matrix ([`preprocess`]), projects it onto the
//! leading principal components ([`pca`]) and classifies with a two-hidden-layer
//! perceptron ([`mlp`]). [`pipeline`] ties the stages together and persists
//! them as one model bundle.

#[cfg(feature = "cli")]
pub mod cli;
pub mod entropy;
pub mod error;
pub mod features;
pub mod metrics;
pub mod mlp;
pub mod pca;
pub mod pdf;
pub mod pipeline;
pub mod preprocess;
pub mod synth;

pub use error::{Error, ModelInvalidReason, Result};
