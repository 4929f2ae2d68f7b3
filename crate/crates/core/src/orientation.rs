//! Block orientation and gradient coherence from the 2x2 structure tensor.
//!
//! Angles follow the dominant *gradient* axis, i.e. the direction normal to
//! the ridges: vertical stripes (intensity varying along x) give `theta = 0`.
//! Angles are measured in image coordinates (x right, y down) and folded to
//! `[0, π)`.

use std::f64::consts::PI;

use crate::blocks::{BlockGrid, BlockRect};
use crate::image::GrayImage;

/// 3x3 Sobel gradients of the whole image with edge replication.
#[derive(Debug, Clone)]
pub struct Gradients {
    width: usize,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
}

impl Gradients {
    pub fn sobel(img: &GrayImage) -> Self {
        let (w, h) = (img.width(), img.height());
        let mut gx = vec![0.0; w * h];
        let mut gy = vec![0.0; w * h];
        for y in 0..h as isize {
            for x in 0..w as isize {
                let p = |dx: isize, dy: isize| f64::from(img.get_clamped(x + dx, y + dy));
                let sx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
                let sy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
                let i = y as usize * w + x as usize;
                gx[i] = sx;
                gy[i] = sy;
            }
        }
        Self { width: w, gx, gy }
    }

    pub fn tensor(&self, rect: BlockRect) -> StructureTensor {
        let mut t = StructureTensor::default();
        for (x, y) in rect.pixels() {
            let i = y * self.width + x;
            t.accumulate(self.gx[i], self.gy[i]);
        }
        t
    }
}

/// Summed gradient outer products `Gxx = Σgx²`, `Gyy = Σgy²`, `Gxy = Σgx·gy`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StructureTensor {
    pub gxx: f64,
    pub gyy: f64,
    pub gxy: f64,
}

impl StructureTensor {
    pub fn from_gradients(gx: &[f64], gy: &[f64]) -> Self {
        let mut t = Self::default();
        for (&a, &b) in gx.iter().zip(gy) {
            t.accumulate(a, b);
        }
        t
    }

    #[inline]
    pub fn accumulate(&mut self, gx: f64, gy: f64) {
        self.gxx += gx * gx;
        self.gyy += gy * gy;
        self.gxy += gx * gy;
    }

    /// Dominant gradient direction in `[0, π)`; 0 when all gradients vanish.
    pub fn theta(&self) -> f64 {
        let num = 2.0 * self.gxy;
        let den = self.gxx - self.gyy;
        if num == 0.0 && den == 0.0 {
            return 0.0;
        }
        fold_angle(0.5 * num.atan2(den))
    }

    /// `sqrt((Gxx - Gyy)² + 4 Gxy²) / (Gxx + Gyy)`, 0 for a zero tensor.
    pub fn coherence(&self) -> f64 {
        let energy = self.gxx + self.gyy;
        if energy <= 0.0 {
            return 0.0;
        }
        let d = self.gxx - self.gyy;
        ((d * d + 4.0 * self.gxy * self.gxy).sqrt() / energy).clamp(0.0, 1.0)
    }
}

/// Folds any angle into `[0, π)`.
pub fn fold_angle(a: f64) -> f64 {
    let r = a.rem_euclid(PI);
    // rem_euclid can round up to exactly π
    if r >= PI {
        0.0
    } else {
        r
    }
}

/// Undirected angular distance between two orientations, in `[0, π/2]`.
pub fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).abs().rem_euclid(PI);
    d.min(PI - d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockOrientation {
    pub theta: f64,
    pub coherence: f64,
}

/// Orientation and coherence for every foreground block; background blocks
/// carry no entry.
#[derive(Debug, Clone, PartialEq)]
pub struct OrientationField {
    entries: Vec<Option<BlockOrientation>>,
}

impl OrientationField {
    pub fn from_entries(entries: Vec<Option<BlockOrientation>>) -> Self {
        Self { entries }
    }

    pub fn get(&self, idx: usize) -> Option<BlockOrientation> {
        self.entries.get(idx).copied().flatten()
    }

    pub fn entries(&self) -> &[Option<BlockOrientation>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, BlockOrientation)> + '_ {
        self.entries.iter().enumerate().filter_map(|(i, e)| e.map(|o| (i, o)))
    }
}

/// Computes theta and coherence for every foreground block.
pub fn orientation_field(img: &GrayImage, grid: &BlockGrid) -> OrientationField {
    let grads = Gradients::sobel(img);
    let entries = (0..grid.len())
        .map(|idx| {
            grid.is_foreground(idx).then(|| {
                let t = grads.tensor(grid.rect(idx));
                BlockOrientation {
                    theta: t.theta(),
                    coherence: t.coherence(),
                }
            })
        })
        .collect();
    OrientationField { entries }
}

/// Per-block dominant gradient angle (foreground blocks only).
pub fn block_orientation(img: &GrayImage, grid: &BlockGrid) -> Vec<Option<f64>> {
    orientation_field(img, grid)
        .entries
        .iter()
        .map(|e| e.map(|o| o.theta))
        .collect()
}

/// Per-block gradient coherence (foreground blocks only).
pub fn orientation_coherence(img: &GrayImage, grid: &BlockGrid) -> Vec<Option<f64>> {
    orientation_field(img, grid)
        .entries
        .iter()
        .map(|e| e.map(|o| o.coherence))
        .collect()
}
