//! Synthetic ridge patterns with controlled degradation.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::classifier::ScoreSet;
use crate::error::{Error, Result};
use crate::image::GrayImage;

use super::manifest::{scores_to_csv, DatasetManifest, ManifestEntry};

/// Layout of the ridge normal. Angles are in radians; the pattern varies
/// along the normal direction `(cos a, sin a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OrientationMap {
    Constant {
        angle: f64,
    },
    /// Circular ridges around `(cx, cy)` in pixels.
    Concentric {
        cx: f64,
        cy: f64,
    },
    /// Straight ridges bent by a sinusoidal displacement along the ridge.
    Wavy {
        angle: f64,
        amplitude: f64,
        wavelength: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub cx: f64,
    pub cy: f64,
    pub rx: f64,
    pub ry: f64,
}

impl Ellipse {
    fn contains(&self, x: f64, y: f64) -> bool {
        ((x - self.cx) / self.rx).powi(2) + ((y - self.cy) / self.ry).powi(2) <= 1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub width: usize,
    pub height: usize,
    pub orientation: OrientationMap,
    /// Ridge period in pixels.
    pub period: f64,
    /// Peak-to-peak intensity swing.
    pub contrast: f64,
    /// Standard deviation of additive Gaussian noise.
    #[serde(default)]
    pub noise: f64,
    /// Box blur radius in pixels.
    #[serde(default)]
    pub blur: usize,
    #[serde(default)]
    pub seed: u64,
    /// Pixels outside the ellipse are white background.
    #[serde(default)]
    pub mask: Option<Ellipse>,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            width: 160,
            height: 160,
            orientation: OrientationMap::Constant { angle: 0.0 },
            period: 9.0,
            contrast: 160.0,
            noise: 0.0,
            blur: 0,
            seed: 0,
            mask: None,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.width == 0 || self.height == 0 {
            return bad(format!("image size {}x{}", self.width, self.height));
        }
        if !(self.period >= 3.0 && self.period.is_finite()) {
            return bad(format!("period {} below 3 px", self.period));
        }
        if !(0.0..=255.0).contains(&self.contrast) {
            return bad(format!("contrast {} outside [0, 255]", self.contrast));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad(format!("noise {}", self.noise));
        }
        if let Some(e) = self.mask {
            if !(e.rx > 0.0 && e.ry > 0.0) {
                return bad("mask radii must be positive".into());
            }
        }
        Ok(())
    }

    fn projection(&self, x: f64, y: f64) -> f64 {
        match self.orientation {
            OrientationMap::Constant { angle } => x * angle.cos() + y * angle.sin(),
            OrientationMap::Concentric { cx, cy } => (x - cx).hypot(y - cy),
            OrientationMap::Wavy {
                angle,
                amplitude,
                wavelength,
            } => {
                let (c, s) = (angle.cos(), angle.sin());
                let along = -x * s + y * c;
                x * c + y * s + amplitude * (2.0 * PI * along / wavelength).sin()
            }
        }
    }
}

fn box_blur(data: &mut [f64], w: usize, h: usize, r: usize) {
    if r == 0 {
        return;
    }
    let r = r as isize;
    let n = (2 * r + 1) as f64;
    let mut tmp = vec![0.0; data.len()];
    for y in 0..h {
        for x in 0..w {
            let s: f64 = (-r..=r)
                .map(|d| data[y * w + (x as isize + d).clamp(0, w as isize - 1) as usize])
                .sum();
            tmp[y * w + x] = s / n;
        }
    }
    for y in 0..h {
        for x in 0..w {
            let s: f64 = (-r..=r)
                .map(|d| tmp[(y as isize + d).clamp(0, h as isize - 1) as usize * w + x])
                .sum();
            data[y * w + x] = s / n;
        }
    }
}

/// Renders `128 + (contrast/2)·cos(2π·proj/period)`, then blur, then noise,
/// then the background mask. Deterministic for a fixed seed.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<GrayImage> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let mut data: Vec<f64> = (0..w * h)
        .map(|i| {
            let (x, y) = ((i % w) as f64, (i / w) as f64);
            128.0 + spec.contrast / 2.0 * (2.0 * PI * spec.projection(x, y) / spec.period).cos()
        })
        .collect();
    box_blur(&mut data, w, h, spec.blur);
    if spec.noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let normal = Normal::new(0.0, spec.noise).expect("validated noise");
        for v in &mut data {
            *v += normal.sample(&mut rng);
        }
    }
    let pixels = data
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let (x, y) = ((i % w) as f64, (i / w) as f64);
            if spec.mask.is_some_and(|e| !e.contains(x, y)) {
                255
            } else {
                v.round().clamp(0.0, 255.0) as u8
            }
        })
        .collect();
    GrayImage::new(w, h, pixels)
}

/// Similarity scores to emit alongside a synthetic set. Impostor scores are
/// `N(0.2, 0.05)`; the genuine score sits `separation` impostor standard
/// deviations above their mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthScores {
    pub impostors: usize,
    /// Separation range `[low, high]` following image quality.
    pub separation: [f64; 2],
    /// Share of images (chosen at random) whose genuine score is drawn
    /// from the impostor distribution instead.
    #[serde(default)]
    pub degenerate_fraction: f64,
}

/// A ladder of images from worst (`t = 0`) to best (`t = 1`) quality.
/// Each range is given as `[value at t = 0, value at t = 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSetSpec {
    pub count: usize,
    pub base: SynthSpec,
    pub noise: [f64; 2],
    pub contrast: [f64; 2],
    #[serde(default)]
    pub blur: [usize; 2],
    #[serde(default)]
    pub scores: Option<SynthScores>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSet {
    /// Quality parameter `t` of each image, manifest order.
    pub quality: Vec<f64>,
    pub images: Vec<GrayImage>,
    pub manifest: DatasetManifest,
    pub scores: HashMap<String, ScoreSet>,
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Builds the set in memory. Image `i` has quality `t = i / (count - 1)`,
/// manual label `round(9t)` and seed `base.seed + i`.
pub fn generate_set(spec: &SynthSetSpec) -> Result<SynthSet> {
    if spec.count < 2 {
        return Err(Error::InvalidParameter(
            "a synthetic set needs at least 2 images".into(),
        ));
    }
    let n = spec.count;
    let mut quality = Vec::with_capacity(n);
    let mut images = Vec::with_capacity(n);
    let mut entries = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / (n - 1) as f64;
        let s = SynthSpec {
            noise: lerp(spec.noise[0], spec.noise[1], t),
            contrast: lerp(spec.contrast[0], spec.contrast[1], t),
            blur: lerp(spec.blur[0] as f64, spec.blur[1] as f64, t).round() as usize,
            seed: spec.base.seed.wrapping_add(i as u64),
            ..spec.base.clone()
        };
        images.push(generate_synthetic(&s)?);
        quality.push(t);
        entries.push(ManifestEntry {
            path: format!("img_{i:04}.pgm"),
            subject: format!("{:03}", i / 10),
            finger: (i % 10).to_string(),
            qm: Some((9.0 * t).round() as u8),
            scores: None,
        });
    }
    let mut scores = HashMap::new();
    if let Some(sc) = &spec.scores {
        if sc.impostors < 2 {
            return Err(Error::InvalidParameter("need at least 2 impostor scores".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.base.seed ^ 0x5c0e5);
        let normal = Normal::new(0.2, 0.05).expect("constant parameters");
        let mut degenerate = vec![false; n];
        let k = ((sc.degenerate_fraction.clamp(0.0, 1.0)) * n as f64).round() as usize;
        degenerate[..k].iter_mut().for_each(|d| *d = true);
        degenerate.shuffle(&mut rng);
        for (i, e) in entries.iter_mut().enumerate() {
            let impostors: Vec<f64> = (0..sc.impostors).map(|_| normal.sample(&mut rng)).collect();
            let genuine = if degenerate[i] {
                normal.sample(&mut rng)
            } else {
                0.2 + 0.05 * lerp(sc.separation[0], sc.separation[1], quality[i])
            };
            let set = ScoreSet { genuine, impostors };
            e.scores = Some(set.clone());
            scores.insert(e.path.clone(), set);
        }
    }
    let manifest = DatasetManifest::new(entries, "")?;
    Ok(SynthSet {
        quality,
        images,
        manifest,
        scores,
    })
}

/// Writes the images as PGM plus `manifest.csv` (and `scores.csv` when
/// scores are requested) into `dir`.
pub fn write_synthetic_set(spec: &SynthSetSpec, dir: impl AsRef<Path>) -> Result<DatasetManifest> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let set = generate_set(spec)?;
    for (e, img) in set.manifest.entries.iter().zip(&set.images) {
        img.save_pgm(dir.join(&e.path))?;
    }
    let write = |name: &str, text: String| {
        let p = dir.join(name);
        std::fs::write(&p, text).map_err(|e| Error::io(p, e))
    };
    write("manifest.csv", set.manifest.to_csv()?)?;
    if spec.scores.is_some() {
        let rows = set
            .manifest
            .entries
            .iter()
            .map(|e| (e.path.as_str(), &set.scores[&e.path]));
        write("scores.csv", scores_to_csv(rows)?)?;
    }
    let mut manifest = set.manifest;
    manifest.base_dir = dir.to_path_buf();
    Ok(manifest)
}
