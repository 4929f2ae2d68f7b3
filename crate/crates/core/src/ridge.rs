//! Sinusoidal ridge model and ridge/valley thickness.
//!
//! Each block is summarised by its *signature*: the pixels of an oriented
//! window (length `2B` across the ridges, width `B` along them) centred on the
//! block, averaged along the ridge direction and binned by their 1-pixel
//! position on the normal axis. The signature of a clean fingerprint block is
//! close to a sinusoid.

use std::f64::consts::PI;

use crate::blocks::BlockGrid;
use crate::image::GrayImage;
use crate::orientation::OrientationField;

const MIN_SIGNATURE_LEN: usize = 4;
const FREQ_SEARCH_MIN: f64 = 0.02;
const FREQ_SEARCH_MAX: f64 = 0.5;
const FREQ_SEARCH_STEP: f64 = 0.004;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignatureSample {
    /// Mean position of the binned pixels on the normal axis.
    pub position: f64,
    pub value: f64,
    pub count: usize,
}

/// Projected intensity profile across the ridges of one block.
#[derive(Debug, Clone)]
pub struct Signature {
    samples: Vec<SignatureSample>,
    /// Raw `(position, intensity)` of every window pixel.
    pixels: Vec<(f64, f64)>,
}

/// Parameters of the best-fitting sinusoid `offset + amplitude·cos(2πf·u + φ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinusoidParams {
    pub amplitude: f64,
    /// Cycles per pixel.
    pub frequency: f64,
    /// Mean squared residual of the window pixels around the fit.
    pub variance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thickness {
    /// Mean width of dark runs, pixels.
    pub ridge: f64,
    /// Mean width of light runs, pixels.
    pub valley: f64,
    pub rv_ratio: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockRidge {
    pub amplitude: f64,
    pub frequency: f64,
    pub variance: f64,
    pub ridge_thickness: Option<f64>,
    pub valley_thickness: Option<f64>,
    pub rv_ratio: Option<f64>,
}

/// Per-block ridge statistics; `None` for background blocks and blocks whose
/// signature is too short to analyse.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeStats {
    entries: Vec<Option<BlockRidge>>,
}

impl RidgeStats {
    pub fn from_entries(entries: Vec<Option<BlockRidge>>) -> Self {
        Self { entries }
    }

    pub fn get(&self, idx: usize) -> Option<BlockRidge> {
        self.entries.get(idx).copied().flatten()
    }

    pub fn entries(&self) -> &[Option<BlockRidge>] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, BlockRidge)> + '_ {
        self.entries.iter().enumerate().filter_map(|(i, e)| e.map(|r| (i, r)))
    }

    /// All defined ridge-to-valley ratios, in block order.
    pub fn rv_ratios(&self) -> Vec<f64> {
        self.iter().filter_map(|(_, r)| r.rv_ratio).collect()
    }
}

impl Signature {
    /// Samples the oriented window of block `idx`; `theta` is the ridge
    /// normal (gradient direction).
    pub fn extract(img: &GrayImage, grid: &BlockGrid, idx: usize, theta: f64) -> Option<Self> {
        let b = grid.block_size() as f64;
        let rect = grid.rect(idx);
        let cx = (rect.x0 + rect.x1 - 1) as f64 / 2.0;
        let cy = (rect.y0 + rect.y1 - 1) as f64 / 2.0;
        let (nx, ny) = (theta.cos(), theta.sin());
        let half_len = b;
        let half_wid = b / 2.0;
        let reach = (half_len * half_len + half_wid * half_wid).sqrt().ceil();
        let x_lo = (cx - reach).floor().max(0.0) as usize;
        let y_lo = (cy - reach).floor().max(0.0) as usize;
        let x_hi = ((cx + reach).ceil() as usize).min(img.width() - 1);
        let y_hi = ((cy + reach).ceil() as usize).min(img.height() - 1);

        let nbins = 2 * grid.block_size() + 1;
        let offset = grid.block_size() as f64;
        let mut sum_u = vec![0.0; nbins];
        let mut sum_v = vec![0.0; nbins];
        let mut count = vec![0usize; nbins];
        let mut pixels = Vec::new();
        for y in y_lo..=y_hi {
            for x in x_lo..=x_hi {
                let dx = x as f64 - cx;
                let dy = y as f64 - cy;
                let u = dx * nx + dy * ny;
                let v = -dx * ny + dy * nx;
                if u.abs() > half_len || v.abs() > half_wid || !grid.is_foreground(grid.block_of(x, y)) {
                    continue;
                }
                let k = ((u + offset).round() as usize).min(nbins - 1);
                let val = f64::from(img.get(x, y));
                sum_u[k] += u;
                sum_v[k] += val;
                count[k] += 1;
                pixels.push((u, val));
            }
        }
        let samples: Vec<SignatureSample> = (0..nbins)
            .filter(|&k| count[k] > 0)
            .map(|k| SignatureSample {
                position: sum_u[k] / count[k] as f64,
                value: sum_v[k] / count[k] as f64,
                count: count[k],
            })
            .collect();
        (samples.len() >= MIN_SIGNATURE_LEN).then_some(Self { samples, pixels })
    }

    /// A signature from unit-spaced values (one pixel per sample).
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.len() < MIN_SIGNATURE_LEN {
            return None;
        }
        let samples = values
            .iter()
            .enumerate()
            .map(|(k, &v)| SignatureSample {
                position: k as f64,
                value: v,
                count: 1,
            })
            .collect();
        let pixels = values.iter().enumerate().map(|(k, &v)| (k as f64, v)).collect();
        Some(Self { samples, pixels })
    }

    pub fn samples(&self) -> &[SignatureSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn values(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.value).collect()
    }

    /// Width-3 moving average (edges use the available neighbours).
    pub fn smoothed(&self) -> Vec<f64> {
        let v = self.values();
        (0..v.len())
            .map(|i| {
                let lo = i.saturating_sub(1);
                let hi = (i + 1).min(v.len() - 1);
                v[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
            })
            .collect()
    }

    /// Sign changes of the smoothed, mean-removed signature.
    pub fn zero_crossings(&self) -> usize {
        let s = self.smoothed();
        let m = s.iter().sum::<f64>() / s.len() as f64;
        let mut last = 0.0f64;
        let mut n = 0;
        for v in s.iter().map(|v| v - m) {
            if v != 0.0 {
                if last != 0.0 && v.signum() != last.signum() {
                    n += 1;
                }
                last = v;
            }
        }
        n
    }

    /// Weighted least-squares fit of `a + b·cos(2πfu) + c·sin(2πfu)` at a
    /// fixed frequency. Returns `(a, b, c, weighted SSE)`.
    fn fit_at(&self, f: f64) -> Option<(f64, f64, f64, f64)> {
        let w = 2.0 * PI * f;
        let mut m = [[0.0f64; 3]; 3];
        let mut r = [0.0f64; 3];
        for s in &self.samples {
            let basis = [1.0, (w * s.position).cos(), (w * s.position).sin()];
            let wt = s.count as f64;
            for i in 0..3 {
                r[i] += wt * basis[i] * s.value;
                for j in 0..3 {
                    m[i][j] += wt * basis[i] * basis[j];
                }
            }
        }
        let [a, b, c] = solve3(m, r)?;
        let sse = self
            .samples
            .iter()
            .map(|s| {
                let model = a + b * (w * s.position).cos() + c * (w * s.position).sin();
                s.count as f64 * (s.value - model).powi(2)
            })
            .sum();
        Some((a, b, c, sse))
    }

    /// Fits the sinusoid model: a coarse frequency scan followed by a
    /// golden-section refinement of the least-squares residual.
    pub fn fit_sinusoid(&self) -> SinusoidParams {
        let vals = self.values();
        let (lo, hi) = vals
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        let pixel_mean = self.pixels.iter().map(|p| p.1).sum::<f64>() / self.pixels.len() as f64;
        let flat_variance =
            || self.pixels.iter().map(|p| (p.1 - pixel_mean).powi(2)).sum::<f64>() / self.pixels.len() as f64;
        if hi - lo < 1e-9 || self.zero_crossings() == 0 {
            let s = self.smoothed();
            let (slo, shi) = s
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
            return SinusoidParams {
                amplitude: (shi - slo) / 2.0,
                frequency: 0.0,
                variance: flat_variance(),
            };
        }

        let sse_at = |f: f64| self.fit_at(f).map_or(f64::INFINITY, |r| r.3);
        let mut best_f = FREQ_SEARCH_MIN;
        let mut best = f64::INFINITY;
        let steps = ((FREQ_SEARCH_MAX - FREQ_SEARCH_MIN) / FREQ_SEARCH_STEP).round() as usize;
        for k in 0..=steps {
            let f = FREQ_SEARCH_MIN + k as f64 * FREQ_SEARCH_STEP;
            let e = sse_at(f);
            if e < best {
                best = e;
                best_f = f;
            }
        }
        // golden-section search around the coarse minimum
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let mut a = (best_f - FREQ_SEARCH_STEP).max(FREQ_SEARCH_MIN);
        let mut b = (best_f + FREQ_SEARCH_STEP).min(FREQ_SEARCH_MAX);
        let mut x1 = b - g * (b - a);
        let mut x2 = a + g * (b - a);
        let (mut e1, mut e2) = (sse_at(x1), sse_at(x2));
        for _ in 0..40 {
            if e1 < e2 {
                b = x2;
                x2 = x1;
                e2 = e1;
                x1 = b - g * (b - a);
                e1 = sse_at(x1);
            } else {
                a = x1;
                x1 = x2;
                e1 = e2;
                x2 = a + g * (b - a);
                e2 = sse_at(x2);
            }
        }
        let f = if e1.min(e2) <= best { (a + b) / 2.0 } else { best_f };
        let Some((a0, b0, c0, _)) = self.fit_at(f) else {
            return SinusoidParams {
                amplitude: (hi - lo) / 2.0,
                frequency: 0.0,
                variance: flat_variance(),
            };
        };
        let w = 2.0 * PI * f;
        let variance = self
            .pixels
            .iter()
            .map(|&(u, v)| (v - (a0 + b0 * (w * u).cos() + c0 * (w * u).sin())).powi(2))
            .sum::<f64>()
            / self.pixels.len() as f64;
        SinusoidParams {
            amplitude: b0.hypot(c0),
            frequency: f,
            variance,
        }
    }

    /// Threshold crossings of the signature at `level`, linearly
    /// interpolated between samples. Returns `(position, rising)`.
    fn crossings(&self, level: f64) -> Vec<(f64, bool)> {
        let s = &self.samples;
        let mut out = Vec::new();
        for k in 1..s.len() {
            let (a, b) = (s[k - 1].value - level, s[k].value - level);
            let below_a = a < 0.0;
            let below_b = b < 0.0;
            if below_a != below_b {
                let t = a / (a - b);
                let pos = s[k - 1].position + t * (s[k].position - s[k - 1].position);
                out.push((pos, below_a));
            }
        }
        out
    }

    /// Mean of the signature. When the signature oscillates, the mean is
    /// taken over the whole periods between the first and last crossing of
    /// the same direction so partial cycles do not bias it.
    pub fn mean_level(&self) -> f64 {
        let vals = self.values();
        let plain = vals.iter().sum::<f64>() / vals.len() as f64;
        let xs = self.crossings(plain);
        if xs.len() < 3 {
            return plain;
        }
        let first = xs[0];
        let Some(last) = xs.iter().rev().find(|c| c.1 == first.1) else {
            return plain;
        };
        if last.0 <= first.0 {
            return plain;
        }
        let inside: Vec<f64> = self
            .samples
            .iter()
            .filter(|s| s.position >= first.0 && s.position < last.0)
            .map(|s| s.value)
            .collect();
        if inside.is_empty() {
            plain
        } else {
            inside.iter().sum::<f64>() / inside.len() as f64
        }
    }

    /// Binarizes at [`Self::mean_level`] (dark samples strictly below it are
    /// ridge) and measures the mean dark and light run lengths in samples.
    /// Runs cut by the signature ends are used only when no complete run of
    /// that kind exists.
    pub fn run_lengths(&self) -> Option<Thickness> {
        let level = self.mean_level();
        // runs: (is_ridge, length, complete)
        let mut runs: Vec<(bool, usize, bool)> = Vec::new();
        for s in &self.samples {
            let ridge = s.value < level;
            match runs.last_mut() {
                Some(r) if r.0 == ridge => r.1 += 1,
                _ => runs.push((ridge, 1, true)),
            }
        }
        if runs.len() < 2 {
            return None;
        }
        let last = runs.len() - 1;
        runs[0].2 = false;
        runs[last].2 = false;

        let mean_width = |ridge: bool| {
            let complete: Vec<usize> = runs.iter().filter(|r| r.0 == ridge && r.2).map(|r| r.1).collect();
            let pool = if complete.is_empty() {
                runs.iter().filter(|r| r.0 == ridge).map(|r| r.1).collect()
            } else {
                complete
            };
            (!pool.is_empty()).then(|| pool.iter().sum::<usize>() as f64 / pool.len() as f64)
        };
        let ridge = mean_width(true)?;
        let valley = mean_width(false)?;
        Some(Thickness {
            ridge,
            valley,
            rv_ratio: (valley > 0.0).then(|| ridge / valley),
        })
    }
}

fn solve3(mut m: [[f64; 3]; 3], mut r: [f64; 3]) -> Option<[f64; 3]> {
    let scale = m[0][0].abs().max(1.0);
    for col in 0..3 {
        let piv = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-10 * scale {
            return None;
        }
        m.swap(col, piv);
        r.swap(col, piv);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            r[row] -= f * r[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| m[row][k] * x[k]).sum();
        x[row] = (r[row] - s) / m[row][row];
    }
    Some(x)
}

fn signatures<'a>(
    img: &'a GrayImage,
    grid: &'a BlockGrid,
    field: &'a OrientationField,
) -> impl Iterator<Item = Option<Signature>> + 'a {
    (0..grid.len()).map(move |idx| {
        let o = field.get(idx).filter(|_| grid.is_foreground(idx))?;
        Signature::extract(img, grid, idx, o.theta)
    })
}

/// Amplitude, frequency and residual variance of each foreground block.
pub fn sinusoid_params(img: &GrayImage, grid: &BlockGrid, field: &OrientationField) -> Vec<Option<SinusoidParams>> {
    signatures(img, grid, field)
        .map(|s| s.map(|s| s.fit_sinusoid()))
        .collect()
}

/// Ridge and valley widths of each foreground block.
pub fn ridge_valley_stats(img: &GrayImage, grid: &BlockGrid, field: &OrientationField) -> Vec<Option<Thickness>> {
    signatures(img, grid, field)
        .map(|s| s.and_then(|s| s.run_lengths()))
        .collect()
}

/// Both analyses from a single signature pass.
pub fn ridge_stats(img: &GrayImage, grid: &BlockGrid, field: &OrientationField) -> RidgeStats {
    let entries = signatures(img, grid, field)
        .map(|s| {
            let s = s?;
            let fit = s.fit_sinusoid();
            let th = s.run_lengths();
            Some(BlockRidge {
                amplitude: fit.amplitude,
                frequency: fit.frequency,
                variance: fit.variance,
                ridge_thickness: th.map(|t| t.ridge),
                valley_thickness: th.map(|t| t.valley),
                rv_ratio: th.and_then(|t| t.rv_ratio),
            })
        })
        .collect();
    RidgeStats { entries }
}
