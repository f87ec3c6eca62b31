//! Training and instrumentation for label-noise memorization experiments on
//! fully connected ReLU networks.
//!
//! - [`nn`]: dense network, backprop, Adam, gradient checking, checkpoints.
//! - [`data`]: CIFAR-10 loading, synthetic clusters, label noise, grouping.
//! - [`metrics`]: four-way split evaluation, probe schedule, phases, CSV log.
//! - [`probes`]: class-mean activations, cosine similarity, large activations.
//! - [`train`]: the shuffled mini-batch loop.

pub mod data;
mod error;
pub mod metrics;
pub mod nn;
pub mod probes;
pub mod train;

pub use error::{Error, Result};

/// Generator behind every seeded draw (init, noise, shuffling, synthetic data).
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha 0.9)";
