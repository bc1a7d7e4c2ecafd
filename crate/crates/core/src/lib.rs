//! Temporal link prediction on yearly trade networks.
//!
//! A variational graph encoder embeds each yearly snapshot, a GRU with an
//! exponential-moving-average adjacency memory aggregates a window of
//! embeddings into next-year edge logits, and a Gaussian-process optimizer
//! with median pruning tunes the hyperparameters.

pub mod bayesopt;
pub mod config;
pub mod encoder;
pub mod error;
pub mod graphdata;
pub mod numerics;
pub mod par;
pub mod tama;
pub mod training;

pub use error::{Error, Result};
