//! Model maps built from log-likelihood matrices.
//!
//! A model map places `K` language models in a common coordinate space derived
//! from their log-likelihoods on `N` texts. Squared distances between the
//! doubly centered rows approximate `2N` times the KL divergence between the
//! models. This crate covers the full pipeline:
//!
//! * [`matrix`]: clipping, double centering, exact distances, KL estimates.
//! * [`sampling`]: uniform, length-squared and KL importance resampling of texts,
//!   with weighted re-centering and weighted distances.
//! * [`bootstrap`]: resampling error, sampling error and the population error
//!   decomposition, plus the smallest-`n` search.
//! * [`oracle`]: brute-force enumeration checks of unbiasedness, variance and
//!   optimality of the resampling probabilities on tiny instances.
//! * [`mapalign`]: PCA embedding, orthogonal Procrustes alignment and
//!   standard deviational ellipses.
//! * [`predict`]: weighted ridge regression with grouped nested cross-validation.
//! * [`io`]: delimited and binary matrix formats, digests.
//! * [`verify`]: the seeded self-check suite.
//!
//! Parallel loops go through [`Execution`]; with the `parallel` feature disabled
//! every loop runs sequentially and results are bit-identical either way.

pub mod bootstrap;
pub mod error;
pub mod exec;
pub mod io;
pub mod mapalign;
pub mod matrix;
pub mod oracle;
pub mod predict;
pub mod sampling;
pub mod verify;

pub use error::{Error, Result};
pub use exec::Execution;
pub use matrix::{CenteredMatrix, DistanceKind, DistanceMatrix, LikelihoodMatrix};
pub use sampling::{Method, ResampleDraw, SamplingPlan, WeightedCoordinates};

/// Library version embedded in emitted metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
