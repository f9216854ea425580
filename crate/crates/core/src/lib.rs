//! Coarse-sensor simulation, random-forest super-resolution (RFSR) and
//! detection scoring for overhead imagery.
//!
//! The crate is organized as one module per pipeline stage:
//!
//! - [`raster`]: the in-memory image type, YCbCr conversion, Gaussian blur,
//!   area decimation, bicubic upsampling and PNG/PNM I/O.
//! - [`sensorsim`]: point-spread-function blur plus decimation to simulate a
//!   coarser, Nyquist-sampled sensor from 30 cm imagery.
//! - [`rfsr`]: shifted-luminance feature stacks, a seeded CART regression
//!   forest with out-of-bag scoring, and residual reconstruction.
//! - [`quality`]: PSNR and SSIM on luminance.
//! - [`deteval`]: IoU matching, per-class NMS, threshold sweeps, AP/mAP,
//!   image-level bootstrap and the sigma-difference statistic.
//! - [`datasetio`]: class aggregation, label rescaling, tiling and splits.
//! - [`synthetic`]: seeded synthetic imagery used by tests and benchmarks.

pub mod datasetio;
pub mod deteval;
mod error;
pub mod quality;
pub mod raster;
pub mod rfsr;
pub mod sensorsim;
pub mod stats;
pub mod synthetic;

pub use error::{Error, Result};
pub use raster::{Bands, Raster};
