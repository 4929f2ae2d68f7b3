//! Local-feature quality measures: each foreground block is classified and
//! the labels are pooled into an image score.

mod chen;
mod directional;
mod gabor;
mod hong;
mod lim;

pub use chen::chen_local_index;
pub use directional::{
    direction_histogram, directional_differences, directional_quality, DirectionalLabel, DirectionalParams,
    DirectionalResult,
};
pub use gabor::{gabor_quality, GaborLabel, GaborParams, GaborResult};
pub use hong::{hong_classify, Decision, HongLabel, HongResult, HongThresholds, RejectReason};
pub use lim::{block_quality_levels, lim_local_score, LimLabel, LimResult, LimThresholds};

use serde::Serialize;

use crate::blocks::BlockGrid;

/// One row of the per-block label map.
#[derive(Debug, Clone, Serialize)]
pub struct BlockLabels {
    pub row: usize,
    pub col: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lim: Option<LimLabel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hong: Option<HongLabel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gabor: Option<GaborLabel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub directional: Option<DirectionalLabel>,
}

/// Whatever label sets are available for one image.
#[derive(Debug, Clone, Copy, Default)]
pub struct LabelSources<'a> {
    pub lim: Option<&'a LimResult>,
    pub hong: Option<&'a HongResult>,
    pub gabor: Option<&'a GaborResult>,
    pub directional: Option<&'a DirectionalResult>,
}

/// Label map for heatmap debugging: one entry per block in row-major order.
pub fn label_map(grid: &BlockGrid, sources: LabelSources<'_>) -> Vec<BlockLabels> {
    (0..grid.len())
        .map(|idx| {
            let (row, col) = grid.row_col(idx);
            BlockLabels {
                row,
                col,
                lim: sources.lim.map(|r| r.labels[idx]),
                hong: sources.hong.and_then(|r| r.labels[idx]),
                gabor: sources.gabor.and_then(|r| r.labels[idx]),
                directional: sources.directional.and_then(|r| r.labels[idx]),
            }
        })
        .collect()
}

pub fn label_map_json(grid: &BlockGrid, sources: LabelSources<'_>) -> serde_json::Result<String> {
    serde_json::to_string_pretty(&label_map(grid, sources))
}
