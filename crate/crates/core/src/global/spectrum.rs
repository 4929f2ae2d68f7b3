use std::f64::consts::PI;
use std::fmt::Write as _;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::score::{MetricId, QualityScore};

/// Annular region of interest in cycles/pixel, split into equal-width rings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumRoi {
    pub f_min: f64,
    pub f_max: f64,
    pub bands: usize,
}

impl Default for SpectrumRoi {
    fn default() -> Self {
        Self {
            f_min: 1.0 / 25.0,
            f_max: 1.0 / 3.0,
            bands: 10,
        }
    }
}

impl SpectrumRoi {
    pub fn validate(&self) -> Result<()> {
        if !(self.f_min > 0.0 && self.f_min < self.f_max && self.f_max <= 0.5) {
            return Err(Error::InvalidParameter(format!(
                "ROI needs 0 < f_min < f_max ≤ 0.5, got [{}, {}]",
                self.f_min, self.f_max
            )));
        }
        if self.bands < 2 {
            return Err(Error::InvalidParameter("ROI needs at least 2 bands".into()));
        }
        Ok(())
    }

    pub fn band_width(&self) -> f64 {
        (self.f_max - self.f_min) / self.bands as f64
    }

    /// `(f_low, f_high)` of band `k`.
    pub fn band_edges(&self, k: usize) -> (f64, f64) {
        let w = self.band_width();
        let hi = if k + 1 == self.bands {
            self.f_max
        } else {
            self.f_min + (k + 1) as f64 * w
        };
        (self.f_min + k as f64 * w, hi)
    }

    /// Band containing radius `r`, if inside the annulus. The outer edge
    /// belongs to the last band.
    pub fn band_of(&self, r: f64) -> Option<usize> {
        if r < self.f_min || r > self.f_max {
            return None;
        }
        let k = ((r - self.f_min) / self.band_width()) as usize;
        Some(k.min(self.bands - 1))
    }
}

/// Squared DFT magnitudes of the mean-removed, Hann-windowed image.
#[derive(Debug, Clone)]
pub struct PowerSpectrum {
    width: usize,
    height: usize,
    power: Vec<f64>,
}

impl PowerSpectrum {
    /// Radial frequency (cycles/pixel) of bin `(u, v)`.
    pub fn radius(&self, u: usize, v: usize) -> f64 {
        let signed = |k: usize, n: usize| {
            if k <= n / 2 {
                k as f64 / n as f64
            } else {
                (k as f64 - n as f64) / n as f64
            }
        };
        signed(u, self.width).hypot(signed(v, self.height))
    }

    pub fn bins(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.height)
            .flat_map(move |v| (0..self.width).map(move |u| (self.radius(u, v), self.power[v * self.width + u])))
    }

    /// Total power with radius in `[f_min, f_max]`.
    pub fn annulus_energy(&self, f_min: f64, f_max: f64) -> f64 {
        self.bins()
            .filter(|(r, _)| *r >= f_min && *r <= f_max)
            .map(|(_, p)| p)
            .sum()
    }
}

fn hann(n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![1.0; n];
    }
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

pub fn power_spectrum(img: &GrayImage) -> PowerSpectrum {
    let (w, h) = (img.width(), img.height());
    let mean = img.pixels().iter().map(|&p| f64::from(p)).sum::<f64>() / (w * h) as f64;
    let (wx, wy) = (hann(w), hann(h));
    let mut data: Vec<Complex<f64>> = (0..w * h)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            Complex::new((f64::from(img.pixels()[i]) - mean) * wx[x] * wy[y], 0.0)
        })
        .collect();
    let mut planner = FftPlanner::new();
    let row_fft = planner.plan_fft_forward(w);
    for row in data.chunks_mut(w) {
        row_fft.process(row);
    }
    let col_fft = planner.plan_fft_forward(h);
    let mut col = vec![Complex::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            col[y] = data[y * w + x];
        }
        col_fft.process(&mut col);
        for y in 0..h {
            data[y * w + x] = col[y];
        }
    }
    PowerSpectrum {
        width: w,
        height: h,
        power: data.iter().map(|c| c.norm_sqr()).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumQuality {
    pub score: QualityScore,
    pub roi: SpectrumRoi,
    /// Energy per ring, inner to outer.
    pub energies: Vec<f64>,
    /// Energy of the whole annulus, summed independently of the rings.
    pub roi_energy: f64,
}

impl SpectrumQuality {
    pub fn proportions(&self) -> Vec<f64> {
        let total: f64 = self.energies.iter().sum();
        self.energies.iter().map(|e| e / total).collect()
    }

    /// `band,f_low,f_high,energy,p` rows with a header line.
    pub fn profile_csv(&self) -> String {
        let mut out = String::from("band,f_low,f_high,energy,p\n");
        for (k, (e, p)) in self.energies.iter().zip(self.proportions()).enumerate() {
            let (lo, hi) = self.roi.band_edges(k);
            let _ = writeln!(out, "{},{lo},{hi},{e},{p}", k + 1);
        }
        out
    }
}

/// `Q_F = 1 - H(p) / ln(bands)`, `p` the ring energy shares: 1 when all
/// annulus energy sits in one ring, 0 when it is spread evenly.
pub fn spectrum_quality(img: &GrayImage, roi: &SpectrumRoi) -> Result<SpectrumQuality> {
    roi.validate()?;
    if img.width() < 32 || img.height() < 32 {
        return Err(Error::InvalidParameter(format!(
            "spectral quality needs at least 32x32 pixels, got {}x{}",
            img.width(),
            img.height()
        )));
    }
    let spec = power_spectrum(img);
    let mut energies = vec![0.0; roi.bands];
    for (r, p) in spec.bins() {
        if let Some(k) = roi.band_of(r) {
            energies[k] += p;
        }
    }
    let roi_energy = spec.annulus_energy(roi.f_min, roi.f_max);
    let total: f64 = energies.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate("no spectral energy inside the ROI".into()));
    }
    let entropy: f64 = energies
        .iter()
        .map(|e| e / total)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum();
    let value = 1.0 - entropy / (roi.bands as f64).ln();
    Ok(SpectrumQuality {
        score: QualityScore::new(MetricId::QF, value),
        roi: *roi,
        energies,
        roi_energy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn wave(freq: f64, angle: f64, n: usize) -> GrayImage {
        let (c, s) = (angle.cos(), angle.sin());
        GrayImage::from_fn(n, n, |x, y| {
            let u = x as f64 * c + y as f64 * s;
            (128.0 + 100.0 * (2.0 * PI * freq * u).cos()).round() as u8
        })
        .unwrap()
    }

    fn noise(seed: u64, w: usize, h: usize) -> GrayImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GrayImage::from_fn(w, h, |_, _| rng.random()).unwrap()
    }

    /// Naive DFT oracle for a single bin.
    fn dft_power(img: &GrayImage, u: usize, v: usize) -> f64 {
        let (w, h) = (img.width(), img.height());
        let mean = img.pixels().iter().map(|&p| f64::from(p)).sum::<f64>() / (w * h) as f64;
        let (hx, hy) = (hann(w), hann(h));
        let mut acc = Complex::new(0.0, 0.0);
        for y in 0..h {
            for x in 0..w {
                let val = (f64::from(img.get(x, y)) - mean) * hx[x] * hy[y];
                let ph = -2.0 * PI * (u as f64 * x as f64 / w as f64 + v as f64 * y as f64 / h as f64);
                acc += Complex::new(ph.cos(), ph.sin()) * val;
            }
        }
        acc.norm_sqr()
    }

    #[test]
    fn fft_matches_naive_dft() {
        let img = noise(3, 36, 32);
        let spec = power_spectrum(&img);
        for (u, v) in [(0, 0), (1, 0), (5, 7), (35, 31), (18, 16)] {
            let p = spec.power[v * 36 + u];
            let o = dft_power(&img, u, v);
            assert!((p - o).abs() <= 1e-9 * o.max(1.0), "({u},{v}) {p} vs {o}");
        }
    }

    #[test]
    fn sinusoid_in_third_ring_concentrates() {
        let roi = SpectrumRoi::default();
        let (lo, hi) = roi.band_edges(2);
        let f = (lo + hi) / 2.0;
        let q = spectrum_quality(&wave(f, 0.0, 256), &roi).unwrap();
        let p = q.proportions();
        assert!(p[2] > 0.9, "{p:?}");
        assert!(q.score.value > 0.6, "{}", q.score.value);
    }

    #[test]
    fn white_noise_is_spread() {
        let mut scores: Vec<f64> = (0..20)
            .map(|s| {
                spectrum_quality(&noise(s, 128, 128), &SpectrumRoi::default())
                    .unwrap()
                    .score
                    .value
            })
            .collect();
        scores.sort_by(f64::total_cmp);
        let median = (scores[9] + scores[10]) / 2.0;
        assert!(median < 0.1, "median {median}");
    }

    #[test]
    fn point_mass_entropy_is_zero() {
        // a single ring's worth of energy: Q_F = 1 exactly
        let e = [0.0, 0.0, 7.5, 0.0];
        let total: f64 = e.iter().sum();
        let h: f64 = e
            .iter()
            .map(|x| x / total)
            .filter(|&p| p > 0.0)
            .map(|p| -p * p.ln())
            .sum();
        assert_eq!(1.0 - h / 4f64.ln(), 1.0);
    }

    #[test]
    fn rings_partition_roi_energy() {
        for seed in 0..5 {
            let q = spectrum_quality(&noise(seed, 64, 48), &SpectrumRoi::default()).unwrap();
            let sum: f64 = q.energies.iter().sum();
            assert!((sum - q.roi_energy).abs() <= 1e-6 * q.roi_energy);
        }
    }

    #[test]
    fn quarter_turn_invariance() {
        let img = noise(11, 64, 40);
        let a = spectrum_quality(&img, &SpectrumRoi::default()).unwrap().score.value;
        let b = spectrum_quality(&img.rotate90(), &SpectrumRoi::default())
            .unwrap()
            .score
            .value;
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }

    #[test]
    fn flat_image_is_degenerate() {
        let img = GrayImage::new(32, 32, vec![10; 1024]).unwrap();
        assert!(matches!(
            spectrum_quality(&img, &SpectrumRoi::default()),
            Err(Error::Degenerate(_))
        ));
        let small = GrayImage::new(16, 40, vec![10; 640]).unwrap();
        assert!(spectrum_quality(&small, &SpectrumRoi::default()).is_err());
    }

    #[test]
    fn roi_validation_and_profile() {
        assert!(SpectrumRoi {
            f_min: 0.3,
            f_max: 0.2,
            bands: 4
        }
        .validate()
        .is_err());
        assert!(SpectrumRoi {
            f_min: 0.1,
            f_max: 0.2,
            bands: 1
        }
        .validate()
        .is_err());
        let q = spectrum_quality(&noise(1, 32, 32), &SpectrumRoi::default()).unwrap();
        let csv = q.profile_csv();
        assert_eq!(csv.lines().count(), 11);
        assert!(csv.starts_with("band,f_low,f_high,energy,p\n1,0.04,"));
    }
}
