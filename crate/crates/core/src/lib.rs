//! Full-reference image quality assessment built on perceptual strain.
//!
//! Perceived distance between a reference image `s` and a degraded copy `s'`
//! is modelled as the quadratic form `Δᵀ JᵀJ Δ` with `Δ = s' − s` and `J` the
//! Jacobian of a perceptual displacement field. The crate provides:
//!
//! * [`geometry`]: images, difference fields, dense Jacobians, strain tensors.
//! * [`connectivity`]: Jacobians generated by Gaussian and difference-of-Gaussians
//!   connectivity profiles, scored by convolution, plus cross-validated
//!   parameter sweeps.
//! * [`regression`]: a 64×64 tile Jacobian fitted to human ratings by random-walk
//!   coordinate descent.
//! * [`baselines`]: squared Euclidean distance and SSIM.
//! * [`corpus`]: image decoding, grayscale and luminance conventions, rating
//!   manifests and stratified folds.
//! * [`stats`]: correlations, Fisher r-to-z, permutation tests, model
//!   comparison reports and scatter export.
//! * [`metric`]: the scorer interface shared by the evaluation harness and CLI.

pub mod baselines;
pub mod cli;
pub mod connectivity;
pub mod corpus;
mod error;
pub mod geometry;
pub mod metric;
pub mod regression;
pub mod stats;

pub use error::{Error, Result};
pub use geometry::GrayImage;
