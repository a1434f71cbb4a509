//! Triplet-loss embedder training, embedding-collapse diagnostics and
//! random-forest fairness probes.
//!
//! This crate is `no_std` (it needs `alloc`) and performs no IO. File
//! formats, dataset loaders and the experiment runner live in the `fairtrip`
//! crate.
//!
//! The pipeline it supports:
//!
//! 1. [`dataset::encode`] a [`dataset::RawTable`] into an
//!    [`dataset::EncodedDataset`] with every feature scaled to `[0, 1]` and the
//!    sensitive attribute kept as a single 0/1 input column.
//! 2. [`trainer::train`] a two-layer MLP ([`embedder`]) into a 3-dimensional
//!    embedding with the triplet loss ([`triplet`]) under one of five
//!    stochastic triplet selection methods.
//! 3. Inspect snapshots with [`analysis::detect_collapse`] and
//!    [`probe::evaluate_fairness`], which measures how well random forests
//!    recover the target and the sensitive attribute from the embedding.
#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod dataset;
pub mod embedder;
mod error;
pub mod forest;
mod math;
pub mod matrix;
pub mod metrics;
pub mod probe;
pub mod trainer;
pub mod triplet;

pub use error::Error;

/// Embedding dimension. The architecture is fixed to 3 outputs.
pub const EMBED_DIM: usize = 3;

/// A point in the embedding space.
pub type Vec3 = [f64; EMBED_DIM];

/// Seeded generator used everywhere randomness is needed.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Builds the crate's generator from a `u64` seed.
pub fn seeded_rng(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}
