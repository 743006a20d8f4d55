//! HDR radiance-field reconstruction with differentiable Gaussian splatting.
//!
//! Each Gaussian carries a learned log-domain radiance. Splatting produces a
//! per-pixel learned irradiance `E'`, and a learnable tone mapper turns
//! `E' + t'` (with `t'` the scaled log exposure time) into an LDR color.
//! Training runs a coarse phase with a fixed sigmoid tone mapper followed by
//! a fine phase that jointly optimizes the Gaussians and an asymmetric
//! piecewise-linear response grid. Linear HDR radiance is recovered in
//! closed form from `E'`.
//!
//! The crate is organized by pipeline stage:
//!
//! - [`geometry`]: primitives, cameras, covariance and perspective projection
//! - [`raster`]: tiled forward splatting, reference renderer, adjoint pass
//! - [`tone`]: asymmetric grid, sigmoid, grid regularizers
//! - [`exposure`]: exposure-time scaling and the HDR map
//! - [`loss`]: L1, SSIM, total objective and evaluation metrics
//! - [`train`]: Adam, pruning, opacity reset, the coarse-to-fine loop
//! - [`checkpoint`]: versioned binary model container
//! - [`dataset`] and [`pfm`]: on-disk dataset layout and the synthetic generator
//! - [`cli`]: the `hdrgs` command-line surface
//!
//! Runnable walkthroughs of each stage live in the crate's `examples/`.

pub mod checkpoint;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod exposure;
pub mod geometry;
pub mod image;
pub mod loss;
pub mod model;
pub mod pfm;
pub mod raster;
pub mod tone;
pub mod train;

pub use error::{Error, Result};
