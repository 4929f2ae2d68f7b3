//! Whole-image quality measures: orientation continuity, ridge/valley
//! uniformity and spectral ring-energy concentration.

mod continuity;
mod spectrum;
mod uniformity;

pub use continuity::{orientation_continuity, orientation_continuity_with_cap, CONTINUITY_CAP};
pub use spectrum::{power_spectrum, spectrum_quality, PowerSpectrum, SpectrumQuality, SpectrumRoi};
pub use uniformity::{ridge_uniformity, ridge_uniformity_from_ratios, ridge_uniformity_with_scale, UNIFORMITY_SCALE};
