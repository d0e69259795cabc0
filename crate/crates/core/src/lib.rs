//! Learned linear embeddings of local descriptors.
//!
//! Pairs of descriptors are split into four subsets (matching/non-matching crossed with
//! near/far under a symmetric kNN rule). A projection `T` maximizes the weighted ratio
//! of non-matching to matching squared distances, and embeddings are scored by the
//! overlap of the per-subset distance distributions.

// `!(x > 0.0)` style checks deliberately reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod descriptors;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod pairing;
pub mod plot;
pub mod rng;
pub mod scatter;
pub mod solver;
pub mod synthesis;

pub use descriptors::{DescriptorSet, EmbeddingModel, ModelConfig};
pub use error::{Error, Result};
pub use pairing::{PairPartition, PartitionConfig, Subset};
pub use scatter::{BetaWeights, ScatterPair};
pub use solver::{SolverConfig, SolverMode};
