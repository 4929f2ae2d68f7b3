use crate::blocks::BlockGrid;
use crate::error::{Error, Result};
use crate::orientation::OrientationField;
use crate::score::{MetricId, QualityScore};

/// `Q_S`: centroid-weighted mean coherence over the foreground,
/// `Σ w_i·coh_i / Σ w_i`.
pub fn chen_local_index(field: &OrientationField, grid: &BlockGrid) -> Result<QualityScore> {
    let mut num = 0.0;
    let mut den = 0.0;
    for idx in grid.foreground_indices() {
        let w = grid.weight(idx);
        let coh = field.get(idx).map_or(0.0, |o| o.coherence);
        num += w * coh;
        den += w;
    }
    if grid.foreground_count() == 0 {
        return Err(Error::NoForeground);
    }
    if den <= 0.0 {
        return Err(Error::InsufficientData("foreground weights sum to zero".into()));
    }
    Ok(QualityScore::new(MetricId::QS, num / den))
}
