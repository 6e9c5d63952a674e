//! Decision-level fusion of panchromatic (PAN), multispectral (MS) and
//! Landsat time-series imagery for surface-water mapping.
//!
//! The crate is organised around the processing chain:
//!
//! * [`raster`] – grid model, flat-raster I/O, resampling and window statistics.
//! * [`spectral`] – PCA fusion baseline, Gaussian maximum-likelihood classifier,
//!   Landsat water index and Otsu thresholding.
//! * [`morpho`] – morphological profiles, K-Means segmentation and per-segment statistics.
//! * [`shadow`] – shadow projection geometry and per-segment shadow proportion.
//! * [`fusion`] – the two-stage graphical model combining PAN, MS and Landsat beliefs.
//! * [`postclass`] – shadow relabelling and boundary unmixing.
//! * [`eval`] – stratified sampling and confusion-matrix accuracy metrics.
//! * [`synth`] – deterministic synthetic multi-sensor scenes with ground truth.
//! * [`pipeline`] – configuration and artifact-level orchestration used by the CLI.
//!
//! With the default `parallel` feature the data-parallel kernels run on rayon;
//! without it they fall back to plain iterators. Outputs are bit-identical
//! either way.

pub mod error;
pub mod eval;
pub mod fusion;
pub mod landcover;
pub mod morpho;
pub mod par;
pub mod pipeline;
pub mod postclass;
pub mod raster;
pub mod shadow;
pub mod spectral;
pub mod synth;

pub use error::{Error, ErrorKind, Result};
pub use landcover::LandCover;
pub use raster::{BinaryMask, GridGeometry, RasterGrid};
