use std::f64::consts::PI;

use serde::Serialize;

use crate::blocks::BlockGrid;
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::score::{MetricId, QualityScore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DirectionalLabel {
    Directional,
    NonDirectional,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionalParams {
    /// Number of probe directions `n` (angles `dπ/n`).
    pub directions: usize,
    /// Probe length `l` in pixels, odd, centred on the pixel.
    pub probe_length: usize,
    /// A direction is prominent when it wins more than this share of the
    /// block's pixels.
    pub prominence: f64,
}

impl Default for DirectionalParams {
    fn default() -> Self {
        Self {
            directions: 8,
            probe_length: 13,
            prominence: 0.45,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalResult {
    pub score: QualityScore,
    pub labels: Vec<Option<DirectionalLabel>>,
}

/// Pixel offsets of each probe segment, centre excluded.
fn probe_offsets(p: &DirectionalParams) -> Vec<Vec<(isize, isize)>> {
    let half = (p.probe_length / 2) as isize;
    (0..p.directions)
        .map(|d| {
            let a = d as f64 * PI / p.directions as f64;
            (-half..=half)
                .filter(|&k| k != 0)
                .map(|k| {
                    (
                        (k as f64 * a.cos()).round() as isize,
                        (k as f64 * a.sin()).round() as isize,
                    )
                })
                .collect()
        })
        .collect()
}

/// Sum of absolute differences `D_d` between each pixel and its probe
/// neighbours, per direction. Returns `values[d][pixel]`.
pub fn directional_differences(img: &GrayImage, grid: &BlockGrid, idx: usize, p: &DirectionalParams) -> Vec<Vec<f64>> {
    let offsets = probe_offsets(p);
    let rect = grid.rect(idx);
    offsets
        .iter()
        .map(|offs| {
            rect.pixels()
                .map(|(x, y)| {
                    let c = i32::from(img.get(x, y));
                    offs.iter()
                        .map(|&(dx, dy)| {
                            let v = i32::from(img.get_clamped(x as isize + dx, y as isize + dy));
                            (v - c).unsigned_abs()
                        })
                        .sum::<u32>() as f64
                })
                .collect()
        })
        .collect()
}

/// Share of the block's pixels whose smallest `D` lies in each direction.
/// A pixel tied between several directions splits its vote evenly.
pub fn direction_histogram(values: &[Vec<f64>]) -> Vec<f64> {
    let npix = values.first().map_or(0, Vec::len);
    let mut hist = vec![0.0; values.len()];
    if npix == 0 {
        return hist;
    }
    for i in 0..npix {
        let min = values.iter().map(|v| v[i]).fold(f64::INFINITY, f64::min);
        let ties = values.iter().filter(|v| v[i] == min).count() as f64;
        for (h, v) in hist.iter_mut().zip(values) {
            if v[i] == min {
                *h += 1.0 / ties;
            }
        }
    }
    hist.iter_mut().for_each(|h| *h /= npix as f64);
    hist
}

/// Directional iff exactly one orientation collects more than `prominence`
/// of the pixel votes in [`direction_histogram`]. Two prominent directions
/// count as one orientation when they are neighbouring probes, since a ridge
/// running between two probe angles splits its votes.
pub fn classify_block(values: &[Vec<f64>], p: &DirectionalParams) -> DirectionalLabel {
    let n = values.len();
    let prominent: Vec<usize> = direction_histogram(values)
        .iter()
        .enumerate()
        .filter(|(_, &share)| share > p.prominence)
        .map(|(d, _)| d)
        .collect();
    let single = match prominent[..] {
        [_] => true,
        [a, b] => b - a == 1 || (a == 0 && b == n - 1),
        _ => false,
    };
    if single {
        DirectionalLabel::Directional
    } else {
        DirectionalLabel::NonDirectional
    }
}

/// `Q_dir = Σ_D w_i / Σ_F w_i` over directional (D) and foreground (F)
/// blocks, using the grid's centroid weights.
pub fn directional_quality(img: &GrayImage, grid: &BlockGrid, p: &DirectionalParams) -> Result<DirectionalResult> {
    if p.directions < 4 {
        return Err(Error::InvalidParameter(format!(
            "need at least 4 probe directions, got {}",
            p.directions
        )));
    }
    if p.probe_length < 5 || p.probe_length.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "probe length must be odd and ≥ 5, got {}",
            p.probe_length
        )));
    }
    if !(0.0..1.0).contains(&p.prominence) {
        return Err(Error::InvalidParameter(format!(
            "prominence {} outside [0, 1)",
            p.prominence
        )));
    }
    if grid.foreground_count() == 0 {
        return Err(Error::NoForeground);
    }
    let mut labels = vec![None; grid.len()];
    for idx in grid.foreground_indices() {
        let d = directional_differences(img, grid, idx, p);
        labels[idx] = Some(classify_block(&d, p));
    }
    let score = weighted_fraction(grid, &labels)?;
    Ok(DirectionalResult {
        score: QualityScore::new(MetricId::QDir, score),
        labels,
    })
}

/// The pooling formula on its own, for already-labelled blocks.
pub fn weighted_fraction(grid: &BlockGrid, labels: &[Option<DirectionalLabel>]) -> Result<f64> {
    let mut directional = 0.0;
    let mut foreground = 0.0;
    for idx in grid.foreground_indices() {
        let w = grid.weight(idx);
        foreground += w;
        if labels[idx] == Some(DirectionalLabel::Directional) {
            directional += w;
        }
    }
    if foreground <= 0.0 {
        return Err(Error::InsufficientData("foreground weights sum to zero".into()));
    }
    Ok(directional / foreground)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::partition_blocks;

    fn grid3(weights: [f64; 3]) -> BlockGrid {
        let img = GrayImage::new(48, 16, vec![0; 768]).unwrap();
        let g = partition_blocks(&img, 16).unwrap();
        g.with_foreground(vec![true; 3])
            .unwrap()
            .with_weights(weights.to_vec())
            .unwrap()
    }

    #[test]
    fn pooling_formula_examples() {
        use DirectionalLabel::*;
        let g = grid3([1.0, 1.0, 2.0]);
        let all = vec![Some(Directional); 3];
        assert_eq!(weighted_fraction(&g, &all).unwrap(), 1.0);
        let none = vec![Some(NonDirectional); 3];
        assert_eq!(weighted_fraction(&g, &none).unwrap(), 0.0);
        let third = vec![Some(NonDirectional), Some(NonDirectional), Some(Directional)];
        assert_eq!(weighted_fraction(&g, &third).unwrap(), 0.5);
    }

    #[test]
    fn clean_ridges_along_a_probe_are_directional() {
        for angle in [0.0, PI / 4.0, PI / 2.0] {
            let (c, s) = (angle.cos(), angle.sin());
            let img = GrayImage::from_fn(64, 64, |x, y| {
                let u = x as f64 * c + y as f64 * s;
                (128.0 + 100.0 * (2.0 * PI * u / 9.0).cos()).round() as u8
            })
            .unwrap();
            let g = partition_blocks(&img, 16).unwrap();
            let g = g
                .with_foreground(vec![true; 16])
                .unwrap()
                .with_weights(vec![1.0; 16])
                .unwrap();
            let r = directional_quality(&img, &g, &DirectionalParams::default()).unwrap();
            assert_eq!(r.score.value, 1.0, "angle {angle}");
        }
    }

    #[test]
    fn oblique_ridges_degrade_with_noise() {
        use crate::harness::{generate_synthetic, OrientationMap, SynthSpec};
        let q = |noise: f64| {
            let mut total = 0.0;
            for seed in 0..4 {
                let img = generate_synthetic(&SynthSpec {
                    width: 64,
                    height: 64,
                    orientation: OrientationMap::Constant { angle: 0.3 },
                    noise,
                    seed,
                    ..SynthSpec::default()
                })
                .unwrap();
                let g = partition_blocks(&img, 16).unwrap();
                let g = g
                    .with_foreground(vec![true; 16])
                    .unwrap()
                    .with_weights(vec![1.0; 16])
                    .unwrap();
                total += directional_quality(&img, &g, &DirectionalParams::default())
                    .unwrap()
                    .score
                    .value;
            }
            total / 4.0
        };
        let levels = [0.0, 20.0, 50.0, 80.0, 120.0].map(q);
        assert_eq!(levels[0], 1.0);
        assert!(levels.windows(2).all(|w| w[0] >= w[1]), "{levels:?}");
        assert!(levels[4] < 0.3, "{levels:?}");
    }

    #[test]
    fn vote_shares_sum_to_one() {
        let h = direction_histogram(&[vec![1.0, 2.0, 0.0], vec![1.0, 0.0, 5.0], vec![3.0, 0.0, 5.0]]);
        assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((h[0] - 0.5).abs() < 1e-15);
        assert!((h[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn split_between_neighbouring_probes_is_directional() {
        let p = DirectionalParams::default();
        // pixel votes: half to direction 2, half to 3
        let mut values = vec![vec![9.0; 10]; 8];
        for i in 0..10 {
            values[2 + i % 2][i] = 0.0;
        }
        assert_eq!(classify_block(&values, &p), DirectionalLabel::Directional);
        // the ring wraps: 0 and 7 are neighbours
        let mut values = vec![vec![9.0; 10]; 8];
        for i in 0..10 {
            values[if i % 2 == 0 { 0 } else { 7 }][i] = 0.0;
        }
        assert_eq!(classify_block(&values, &p), DirectionalLabel::Directional);
        let mut values = vec![vec![9.0; 10]; 8];
        for i in 0..10 {
            values[if i % 2 == 0 { 1 } else { 5 }][i] = 0.0;
        }
        assert_eq!(classify_block(&values, &p), DirectionalLabel::NonDirectional);
    }

    #[test]
    fn white_noise_is_not_directional() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let img = GrayImage::from_fn(64, 64, |_, _| rng.random()).unwrap();
        let g = partition_blocks(&img, 16).unwrap();
        let g = g
            .with_foreground(vec![true; 16])
            .unwrap()
            .with_weights(vec![1.0; 16])
            .unwrap();
        let r = directional_quality(&img, &g, &DirectionalParams::default()).unwrap();
        assert_eq!(r.score.value, 0.0);
    }

    #[test]
    fn flat_block_is_not_directional() {
        let img = GrayImage::new(32, 32, vec![90; 1024]).unwrap();
        let g = partition_blocks(&img, 16).unwrap();
        let g = g
            .with_foreground(vec![true; 4])
            .unwrap()
            .with_weights(vec![1.0; 4])
            .unwrap();
        let r = directional_quality(&img, &g, &DirectionalParams::default()).unwrap();
        assert_eq!(r.score.value, 0.0);
    }

    #[test]
    fn parameter_validation() {
        let img = GrayImage::new(32, 32, vec![90; 1024]).unwrap();
        let g = partition_blocks(&img, 16).unwrap();
        let fg = g
            .with_foreground(vec![true; 4])
            .unwrap()
            .with_weights(vec![1.0; 4])
            .unwrap();
        let p = DirectionalParams {
            probe_length: 12,
            ..Default::default()
        };
        assert!(directional_quality(&img, &fg, &p).is_err());
        let p = DirectionalParams {
            directions: 2,
            ..Default::default()
        };
        assert!(directional_quality(&img, &fg, &p).is_err());
        assert!(matches!(
            directional_quality(&img, &g, &DirectionalParams::default()),
            Err(Error::NoForeground)
        ));
    }
}
