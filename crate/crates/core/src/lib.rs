//! Training and inference engine for deep Boltzmann machines with binary
//! units and an optional one-of-k label unit.
//!
//! The centerpiece is multi-prediction training: the model is trained to
//! predict randomly chosen subsets of its variables from the complementary
//! subsets by running a fixed number of mean field sweeps and backpropagating
//! the prediction loss through the whole unrolled inference graph. The crate
//! also provides the multi-inference averaging trick for query time, a
//! centered-DBM baseline trained with persistent contrastive divergence, and
//! brute-force enumeration oracles that make every approximation testable on
//! tiny models.
//!
//! Module map:
//! - [`numerics`]: dense kernels with a fixed summation order and a portable
//!   seeded RNG, so identical runs are bit-identical.
//! - [`model`]: shapes, parameters, states, the energy function, and the
//!   centering reparameterization.
//! - [`inference`]: masked block mean field with a replayable trace.
//! - [`mp`]: the multi-prediction objective, backprop through the trace,
//!   regularizers, and the SGD loop.
//! - [`pcd`]: block Gibbs sampling and the PCD baseline trainer.
//! - [`oracle`]: exact partition functions, conditionals, and gradients by
//!   enumeration.
//! - [`data`]: IDX ingestion, binarization, synthetic pattern tasks, and
//!   evaluation query generation.

pub mod data;
pub mod error;
pub mod inference;
pub mod model;
pub mod mp;
pub mod numerics;
pub mod oracle;
pub mod parallel;
pub mod pcd;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
