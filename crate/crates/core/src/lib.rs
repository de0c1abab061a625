//! Bootstrapping-based semi-supervised learning under domain shift.
//!
//! The crate trains a small feed-forward text classifier on a labeled source
//! domain and improves it with unlabeled target-domain data using classic
//! bootstrapping strategies:
//!
//! * self-training with a confidence threshold or with throttling,
//! * tri-training and tri-training with disagreement,
//! * asymmetric tri-training (a target-specific third head is the predictor),
//! * multi-task tri-training (one shared encoder, three softmax heads kept
//!   diverse by an orthogonality penalty).
//!
//! Everything is deterministic under explicit seeds: the random number
//! generator, weight initialization, shuffling, sampling, and bootstrap
//! resampling are all pinned algorithms so that experiment runs are exactly
//! reproducible.
//!
//! Module map:
//!
//! * [`data`] — sparse feature vectors, datasets, corpus ingestion, splits,
//!   bootstrap sampling, and a synthetic domain-shift generator.
//! * [`features`] — n-gram tf-idf featurization.
//! * [`model`] — the single-head and three-head networks with hand-derived
//!   gradients, the orthogonality penalty, and Adam training.
//! * [`ssl`] — the bootstrapping strategies and their shared machinery.
//! * [`eval`] — accuracy, multi-seed aggregation, and the paired bootstrap
//!   significance test.
//! * [`rng`] — the seeded generator all of the above draw from.

// Index loops keep the matrix arithmetic aligned with how it is checked.
#![allow(clippy::needless_range_loop)]

pub mod data;
pub mod error;
pub mod eval;
pub mod features;
pub mod model;
pub mod rng;
pub mod ssl;

pub use error::{Error, Result};
