use std::f64::consts::PI;

use serde::Serialize;

use crate::blocks::BlockGrid;
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::score::{MetricId, QualityScore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GaborLabel {
    Good,
    Poor,
}

/// Gabor bank settings. `threshold` is in intensity units: the spread of
/// the bank's responses needed for a block to count as Good.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaborParams {
    pub orientations: usize,
    pub wavelength: f64,
    pub sigma: f64,
    pub threshold: f64,
    /// Reject the image when QI is below this.
    pub reject_below: f64,
}

impl Default for GaborParams {
    fn default() -> Self {
        Self {
            orientations: 8,
            wavelength: 9.0,
            sigma: 4.0,
            threshold: 4.0,
            reject_below: 0.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaborResult {
    pub score: QualityScore,
    pub labels: Vec<Option<GaborLabel>>,
    /// Bank responses per foreground block (`orientations` values each).
    pub responses: Vec<Option<Vec<f64>>>,
    pub rejected: bool,
}

/// Complex Gabor kernels sampled on a `(2r+1)²` window.
struct Bank {
    radius: isize,
    envelope: Vec<f64>,
    /// Per orientation: interleaved (cos, sin) carrier times envelope.
    carriers: Vec<Vec<(f64, f64)>>,
}

impl Bank {
    fn new(p: &GaborParams) -> Self {
        let radius = (3.0 * p.sigma).ceil() as isize;
        let side = (2 * radius + 1) as usize;
        let mut envelope = Vec::with_capacity(side * side);
        for dy in -radius..=radius {
            for dx in -radius..=radius {
                let r2 = (dx * dx + dy * dy) as f64;
                envelope.push((-r2 / (2.0 * p.sigma * p.sigma)).exp());
            }
        }
        let carriers = (0..p.orientations)
            .map(|k| {
                let phi = k as f64 * PI / p.orientations as f64;
                let (c, s) = (phi.cos(), phi.sin());
                let mut v = Vec::with_capacity(side * side);
                let mut i = 0;
                for dy in -radius..=radius {
                    for dx in -radius..=radius {
                        let arg = 2.0 * PI * (dx as f64 * c + dy as f64 * s) / p.wavelength;
                        v.push((envelope[i] * arg.cos(), envelope[i] * arg.sin()));
                        i += 1;
                    }
                }
                v
            })
            .collect();
        Self {
            radius,
            envelope,
            carriers,
        }
    }

    /// Response magnitudes at `(cx, cy)`, normalised by the envelope mass so
    /// a matched sinusoid of amplitude A responds with about A/2. The
    /// envelope-weighted local mean is removed first.
    fn respond(&self, img: &GrayImage, cx: isize, cy: isize) -> Vec<f64> {
        let r = self.radius;
        let side = 2 * r + 1;
        let mut mass = 0.0;
        let mut weighted = 0.0;
        let mut window = Vec::with_capacity((side * side) as usize);
        for dy in -r..=r {
            for dx in -r..=r {
                let (x, y) = (cx + dx, cy + dy);
                let i = ((dy + r) * side + dx + r) as usize;
                if x < 0 || y < 0 || x >= img.width() as isize || y >= img.height() as isize {
                    window.push(None);
                    continue;
                }
                let v = f64::from(img.get(x as usize, y as usize));
                mass += self.envelope[i];
                weighted += self.envelope[i] * v;
                window.push(Some(v));
            }
        }
        let mean = weighted / mass;
        self.carriers
            .iter()
            .map(|car| {
                let (mut re, mut im) = (0.0, 0.0);
                for (w, &(kc, ks)) in window.iter().zip(car) {
                    if let Some(v) = w {
                        re += (v - mean) * kc;
                        im += (v - mean) * ks;
                    }
                }
                re.hypot(im) / mass
            })
            .collect()
    }
}

fn sample_std(v: &[f64]) -> f64 {
    crate::stats::sample_std(v).unwrap_or(0.0)
}

/// `QI`: fraction of foreground blocks whose bank responses are spread
/// (sample std above `threshold`), i.e. one orientation dominates.
pub fn gabor_quality(img: &GrayImage, grid: &BlockGrid, p: &GaborParams) -> Result<GaborResult> {
    if p.orientations < 4 {
        return Err(Error::InvalidParameter(format!(
            "Gabor bank needs at least 4 orientations, got {}",
            p.orientations
        )));
    }
    if !(p.wavelength > 0.0 && p.sigma > 0.0) {
        return Err(Error::InvalidParameter(
            "Gabor wavelength and sigma must be positive".into(),
        ));
    }
    let total = grid.foreground_count();
    if total == 0 {
        return Err(Error::NoForeground);
    }
    let bank = Bank::new(p);
    let mut labels = vec![None; grid.len()];
    let mut responses = vec![None; grid.len()];
    let mut good = 0usize;
    for idx in grid.foreground_indices() {
        let rect = grid.rect(idx);
        let cx = ((rect.x0 + rect.x1) / 2) as isize;
        let cy = ((rect.y0 + rect.y1) / 2) as isize;
        let resp = bank.respond(img, cx, cy);
        let is_good = sample_std(&resp) > p.threshold;
        if is_good {
            good += 1;
        }
        labels[idx] = Some(if is_good { GaborLabel::Good } else { GaborLabel::Poor });
        responses[idx] = Some(resp);
    }
    let qi = good as f64 / total as f64;
    Ok(GaborResult {
        score: QualityScore::new(MetricId::QI, qi),
        labels,
        responses,
        rejected: qi < p.reject_below,
    })
}
