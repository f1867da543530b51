//! Explainable automatic short-answer grading with neural additive models.
//!
//! The pipeline turns free-text student responses into rubric-phrase
//! similarity features, trains either a neural additive model (one small
//! subnetwork per feature, K-class additive logits) or a multinomial
//! logistic-regression baseline on them, and compares the two with a
//! 5x2 cross-validated paired t-test on quadratic weighted kappa.
//!
//! Modules:
//!
//! - [`dataset`] — corpora of graded responses and stratified 5x2 fold plans
//! - [`featurize`] — n-gram extraction, embeddings, max-cosine phrase features
//! - [`nam`] — the neural additive model: forward pass, contributions,
//!   shape functions, importances, hand-derived gradients
//! - [`trainer`] — deterministic mini-batch Adam training loop
//! - [`logreg`] — multinomial logistic regression fit by L-BFGS
//! - [`stats`] — QWK, the 5x2 paired t-test, Student-t tails, Cohen's D
//! - [`report`] — CSV/SVG export of shape functions and feature importances

pub mod dataset;
pub mod error;
pub mod featurize;
pub mod logreg;
pub mod model_io;
pub mod nam;
pub mod report;
pub mod stats;
pub mod trainer;

pub use error::{Error, Result};

/// Mixes a base seed with a salt into an independent 64-bit stream seed.
///
/// Splitmix64 finalizer over the xor of the two inputs; used everywhere a
/// run-level seed has to spawn per-iteration or per-cell RNG streams.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
