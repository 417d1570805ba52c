//! Adaptive control algorithms.
//!
//! [`NodeController`] covers the decentralized family: plain
//! filtered-reference LMS, its leaky variant, the weight-constrained variant
//! with a fixed center filter, and the self-boosted variant that promotes
//! the best-performing weights to center as the run progresses. One node
//! sees only its own reference and error streams.
//!
//! [`CentralizedController`] and [`CollocatedController`] cover the
//! multiple-error baselines, where a single update couples every control
//! filter to every error sensor through the full matrix of secondary-path
//! models.

mod centralized;
mod node;

pub use centralized::{CentralizedController, CollocatedController};
pub use node::{BoostRecord, NodeController};
