//! Fingerprint image quality assessment.
//!
//! The crate is organised bottom-up:
//!
//! - [`image`] and [`blocks`]: raster ingestion, block decomposition,
//!   foreground segmentation and centroid weighting.
//! - [`orientation`] and [`ridge`]: per-block orientation, gradient coherence
//!   and the sinusoidal ridge model.
//! - [`local`]: block-classification quality measures (recoverability, `S_L`,
//!   `Q_S`, Gabor `QI`, directional `Q_dir`).
//! - [`global`]: whole-image measures (`S_GO`, `S_GR`, spectral `Q_F`).
//! - [`classifier`]: minutiae extraction, feature vectors and the `Q_N` network.
//! - [`harness`]: metric orchestration, subset ranking and reports.
//!
//! Every metric reports a [`QualityScore`] in `[0, 1]`.

pub mod blocks;
pub mod classifier;
pub mod error;
pub mod global;
pub mod harness;
pub mod image;
pub mod local;
pub mod orientation;
pub mod ridge;
pub mod score;
pub mod stats;

pub use blocks::BlockGrid;
pub use error::{Error, Result};
pub use image::GrayImage;
pub use orientation::OrientationField;
pub use ridge::RidgeStats;
pub use score::{MetricId, QualityScore};
