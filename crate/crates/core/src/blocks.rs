//! Non-overlapping block decomposition, foreground segmentation and
//! centroid-distance weighting.

use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Pixel rectangle `[x0, x1) x [y0, y1)` covered by one block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockRect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl BlockRect {
    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    /// Geometric center of the real (clipped) pixel extent.
    pub fn center(&self) -> (f64, f64) {
        ((self.x0 + self.x1) as f64 / 2.0, (self.y0 + self.y1) as f64 / 2.0)
    }

    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.y0..self.y1).flat_map(move |y| (self.x0..self.x1).map(move |x| (x, y)))
    }
}

/// Block decomposition of one image. Blocks are indexed row-major,
/// `index = row * cols + col`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockGrid {
    block_size: usize,
    width: usize,
    height: usize,
    cols: usize,
    rows: usize,
    foreground: Vec<bool>,
    centroid: Option<(f64, f64)>,
    weights: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentParams {
    /// Minimum block intensity standard deviation.
    pub min_std: f64,
    /// Block mean must be strictly below this (ridge ink present).
    pub max_mean: f64,
}

impl Default for SegmentParams {
    fn default() -> Self {
        Self {
            min_std: 12.0,
            max_mean: 220.0,
        }
    }
}

/// Block side scaled from 16 px at 500 dpi.
pub fn default_block_size(dpi: f64) -> usize {
    ((16.0 * dpi / 500.0).round() as usize).max(4)
}

/// Splits the image into `block_size`-square blocks; partial blocks at the
/// right and bottom edges are kept. Foreground and weights start unset.
pub fn partition_blocks(img: &GrayImage, block_size: usize) -> Result<BlockGrid> {
    let max = img.width().min(img.height());
    if block_size < 4 || block_size > max {
        return Err(Error::BlockSize {
            block_size,
            max: max.max(4),
        });
    }
    let cols = img.width().div_ceil(block_size);
    let rows = img.height().div_ceil(block_size);
    Ok(BlockGrid {
        block_size,
        width: img.width(),
        height: img.height(),
        cols,
        rows,
        foreground: vec![false; cols * rows],
        centroid: None,
        weights: vec![0.0; cols * rows],
    })
}

/// Mean and sample standard deviation of the real pixels in a block.
pub fn block_mean_std(img: &GrayImage, rect: BlockRect) -> (f64, f64) {
    let n = rect.area() as f64;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for (x, y) in rect.pixels() {
        let v = f64::from(img.get(x, y));
        sum += v;
        sum_sq += v * v;
    }
    let mean = sum / n;
    let var = if n > 1.0 {
        ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Marks a block foreground when it has ridge contrast (std ≥ `min_std`)
/// and is not mostly white (mean < `max_mean`).
pub fn segment_foreground(img: &GrayImage, grid: &BlockGrid, params: &SegmentParams) -> BlockGrid {
    let mut out = grid.clone();
    for idx in 0..grid.len() {
        let (mean, std) = block_mean_std(img, grid.rect(idx));
        out.foreground[idx] = std >= params.min_std && mean < params.max_mean;
    }
    out.centroid = None;
    out.weights.iter_mut().for_each(|w| *w = 0.0);
    out
}

/// Gaussian kernel width: a quarter of the foreground bounding-box diagonal.
pub fn default_weight_sigma(grid: &BlockGrid) -> Option<f64> {
    let mut bbox: Option<(usize, usize, usize, usize)> = None;
    for idx in grid.foreground_indices() {
        let r = grid.rect(idx);
        bbox = Some(match bbox {
            None => (r.x0, r.y0, r.x1, r.y1),
            Some((a, b, c, d)) => (a.min(r.x0), b.min(r.y0), c.max(r.x1), d.max(r.y1)),
        });
    }
    bbox.map(|(x0, y0, x1, y1)| {
        let dx = (x1 - x0) as f64;
        let dy = (y1 - y0) as f64;
        (dx * dx + dy * dy).sqrt() / 4.0
    })
}

/// Sets the foreground centroid (mean of foreground block centers) and the
/// weights `w = exp(-d² / (2 sigma²))`, `d` the center-to-centroid distance in
/// pixels. Background blocks get weight 0.
pub fn compute_centroid_weights(grid: &BlockGrid, sigma: f64) -> Result<BlockGrid> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("weight sigma {sigma}")));
    }
    let fg: Vec<usize> = grid.foreground_indices().collect();
    if fg.is_empty() {
        return Err(Error::NoForeground);
    }
    let (sx, sy) = fg.iter().fold((0.0, 0.0), |(sx, sy), &i| {
        let (cx, cy) = grid.rect(i).center();
        (sx + cx, sy + cy)
    });
    let centroid = (sx / fg.len() as f64, sy / fg.len() as f64);
    let mut out = grid.clone();
    out.weights.iter_mut().for_each(|w| *w = 0.0);
    for &i in &fg {
        let (cx, cy) = grid.rect(i).center();
        let d2 = (cx - centroid.0).powi(2) + (cy - centroid.1).powi(2);
        out.weights[i] = (-d2 / (2.0 * sigma * sigma)).exp();
    }
    out.centroid = Some(centroid);
    Ok(out)
}

impl BlockGrid {
    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn len(&self) -> usize {
        self.cols * self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn image_size(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    pub fn row_col(&self, idx: usize) -> (usize, usize) {
        (idx / self.cols, idx % self.cols)
    }

    pub fn rect(&self, idx: usize) -> BlockRect {
        let (r, c) = self.row_col(idx);
        let b = self.block_size;
        BlockRect {
            x0: c * b,
            y0: r * b,
            x1: ((c + 1) * b).min(self.width),
            y1: ((r + 1) * b).min(self.height),
        }
    }

    /// True for blocks clipped by the right or bottom image edge.
    pub fn is_partial(&self, idx: usize) -> bool {
        let r = self.rect(idx);
        r.width() < self.block_size || r.height() < self.block_size
    }

    /// Block containing pixel `(x, y)`.
    pub fn block_of(&self, x: usize, y: usize) -> usize {
        self.index(y / self.block_size, x / self.block_size)
    }

    pub fn is_foreground(&self, idx: usize) -> bool {
        self.foreground[idx]
    }

    pub fn foreground(&self) -> &[bool] {
        &self.foreground
    }

    pub fn foreground_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.foreground.iter().enumerate().filter_map(|(i, &f)| f.then_some(i))
    }

    pub fn foreground_count(&self) -> usize {
        self.foreground.iter().filter(|&&f| f).count()
    }

    /// Replaces the foreground mask, clearing centroid and weights.
    pub fn with_foreground(&self, mask: Vec<bool>) -> Result<BlockGrid> {
        if mask.len() != self.len() {
            return Err(Error::InvalidParameter(format!(
                "foreground mask has {} entries, grid has {}",
                mask.len(),
                self.len()
            )));
        }
        let mut out = self.clone();
        out.foreground = mask;
        out.centroid = None;
        out.weights.iter_mut().for_each(|w| *w = 0.0);
        Ok(out)
    }

    /// Replaces the weights (test and tooling hook); background entries are
    /// forced to zero.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<BlockGrid> {
        if weights.len() != self.len() || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidParameter("weights must be finite and ≥ 0".into()));
        }
        let mut out = self.clone();
        for (i, w) in weights.into_iter().enumerate() {
            out.weights[i] = if out.foreground[i] { w } else { 0.0 };
        }
        Ok(out)
    }

    pub fn centroid(&self) -> Option<(f64, f64)> {
        self.centroid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, idx: usize) -> f64 {
        self.weights[idx]
    }

    /// Per-pixel foreground mask expanded from the block mask.
    pub fn pixel_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.width * self.height];
        for idx in self.foreground_indices() {
            let r = self.rect(idx);
            for (x, y) in r.pixels() {
                mask[y * self.width + x] = true;
            }
        }
        mask
    }
}
