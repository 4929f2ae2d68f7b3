use crate::error::{Error, Result};
use crate::ridge::RidgeStats;
use crate::score::{MetricId, QualityScore};
use crate::stats::sample_std;

/// Deviation scale `s₀` of the uniformity mapping.
pub const UNIFORMITY_SCALE: f64 = 0.5;

/// `S_GR = exp(-std(rv_ratio) / s₀)` over the blocks with a defined ratio.
pub fn ridge_uniformity(stats: &RidgeStats) -> Result<QualityScore> {
    ridge_uniformity_from_ratios(&stats.rv_ratios())
}

pub fn ridge_uniformity_from_ratios(ratios: &[f64]) -> Result<QualityScore> {
    ridge_uniformity_with_scale(ratios, UNIFORMITY_SCALE)
}

/// `exp(-std / scale)` for a custom scale.
pub fn ridge_uniformity_with_scale(ratios: &[f64], scale: f64) -> Result<QualityScore> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidParameter(format!("uniformity scale {scale}")));
    }
    let std = sample_std(ratios).ok_or_else(|| {
        Error::InsufficientData(format!(
            "ridge uniformity needs ≥ 2 ridge/valley ratios, got {}",
            ratios.len()
        ))
    })?;
    Ok(QualityScore::new(MetricId::SGR, (-std / scale).exp()))
}
