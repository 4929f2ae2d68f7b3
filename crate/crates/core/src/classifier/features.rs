use serde::{Deserialize, Serialize};

use crate::blocks::BlockGrid;

use super::minutiae::Minutia;

pub const FEATURE_LEN: usize = 11;

/// Minutia quality cut-offs; counts use strict "greater than".
pub const MINUTIA_QUALITY_THRESHOLDS: [f64; 5] = [0.5, 0.6, 0.75, 0.8, 0.9];

/// Feature vector: foreground block count, minutiae count, minutiae above
/// each quality cut-off, and the share of foreground blocks at each of the
/// four block-quality levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub foreground: usize,
    pub minutiae: usize,
    pub q_above: [usize; 5],
    pub block_q_pct: [f64; 4],
}

impl FeatureVector {
    pub fn to_array(&self) -> [f64; FEATURE_LEN] {
        let mut out = [0.0; FEATURE_LEN];
        out[0] = self.foreground as f64;
        out[1] = self.minutiae as f64;
        for (i, &q) in self.q_above.iter().enumerate() {
            out[2 + i] = q as f64;
        }
        out[7..].copy_from_slice(&self.block_q_pct);
        out
    }
}

/// Builds the feature vector. `block_levels` holds a level in 1..=4 for each
/// foreground block (see [`crate::local::block_quality_levels`]).
pub fn build_feature_vector(grid: &BlockGrid, minutiae: &[Minutia], block_levels: &[Option<u8>]) -> FeatureVector {
    let mut q_above = [0usize; 5];
    for m in minutiae {
        for (count, &t) in q_above.iter_mut().zip(&MINUTIA_QUALITY_THRESHOLDS) {
            if m.quality > t {
                *count += 1;
            }
        }
    }
    let foreground = grid.foreground_count();
    let mut level_counts = [0usize; 4];
    for idx in grid.foreground_indices() {
        if let Some(level @ 1..=4) = block_levels.get(idx).copied().flatten() {
            level_counts[usize::from(level) - 1] += 1;
        }
    }
    let block_q_pct = level_counts.map(|c| {
        if foreground == 0 {
            0.0
        } else {
            c as f64 / foreground as f64
        }
    });
    FeatureVector {
        foreground,
        minutiae: minutiae.len(),
        q_above,
        block_q_pct,
    }
}
