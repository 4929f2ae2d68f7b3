use std::f64::consts::FRAC_PI_4;

use crate::blocks::BlockGrid;
use crate::error::{Error, Result};
use crate::orientation::{angular_distance, OrientationField};
use crate::score::{MetricId, QualityScore};

/// Mean angle change at which `S_GO` reaches 0.
pub const CONTINUITY_CAP: f64 = FRAC_PI_4;

/// `S_GO`: mean undirected angle change over 4-neighbour foreground pairs,
/// mapped linearly so that a mean change of π/4 or more scores 0.
pub fn orientation_continuity(field: &OrientationField, grid: &BlockGrid) -> Result<QualityScore> {
    orientation_continuity_with_cap(field, grid, CONTINUITY_CAP)
}

/// [`orientation_continuity`] with a custom cap in radians.
pub fn orientation_continuity_with_cap(field: &OrientationField, grid: &BlockGrid, cap: f64) -> Result<QualityScore> {
    if !(cap > 0.0 && cap.is_finite()) {
        return Err(Error::InvalidParameter(format!("continuity cap {cap}")));
    }
    let theta = |r: usize, c: usize| {
        let idx = grid.index(r, c);
        if grid.is_foreground(idx) {
            field.get(idx).map(|o| o.theta)
        } else {
            None
        }
    };
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for r in 0..grid.rows() {
        for c in 0..grid.cols() {
            let Some(a) = theta(r, c) else { continue };
            if c + 1 < grid.cols() {
                if let Some(b) = theta(r, c + 1) {
                    sum += angular_distance(a, b);
                    pairs += 1;
                }
            }
            if r + 1 < grid.rows() {
                if let Some(b) = theta(r + 1, c) {
                    sum += angular_distance(a, b);
                    pairs += 1;
                }
            }
        }
    }
    if pairs == 0 {
        return Err(Error::InsufficientData("no adjacent foreground block pairs".into()));
    }
    let raw = sum / pairs as f64;
    Ok(QualityScore::new(MetricId::SGO, (1.0 - raw / cap).max(0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::partition_blocks;
    use crate::image::GrayImage;
    use crate::orientation::BlockOrientation;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn field(thetas: &[f64], mask: &[bool]) -> (OrientationField, BlockGrid) {
        let img = GrayImage::new(64, 64, vec![0; 4096]).unwrap();
        let g = partition_blocks(&img, 16)
            .unwrap()
            .with_foreground(mask.to_vec())
            .unwrap();
        let entries = thetas
            .iter()
            .zip(mask)
            .map(|(&t, &m)| {
                m.then_some(BlockOrientation {
                    theta: t,
                    coherence: 1.0,
                })
            })
            .collect();
        (OrientationField::from_entries(entries), g)
    }

    /// Exhaustive oracle: test every ordered block pair for 4-adjacency.
    fn brute_force(thetas: &[f64], mask: &[bool]) -> Option<f64> {
        let mut total = 0.0;
        let mut n = 0;
        for a in 0usize..16 {
            for b in (a + 1)..16 {
                let (ra, ca) = (a / 4, a % 4);
                let (rb, cb) = (b / 4, b % 4);
                let adjacent = ra.abs_diff(rb) + ca.abs_diff(cb) == 1;
                if adjacent && mask[a] && mask[b] {
                    let d = (thetas[a] - thetas[b]).abs();
                    let d = d.min(PI - d);
                    total += d;
                    n += 1;
                }
            }
        }
        (n > 0).then(|| (1.0 - (total / n as f64) / (PI / 4.0)).max(0.0))
    }

    #[test]
    fn constant_field_is_perfect() {
        let (f, g) = field(&[0.7; 16], &[true; 16]);
        assert_eq!(orientation_continuity(&f, &g).unwrap().value, 1.0);
    }

    #[test]
    fn checkerboard_clamps_to_zero() {
        let t: Vec<f64> = (0..16)
            .map(|i| if (i / 4 + i % 4) % 2 == 0 { 0.0 } else { PI / 2.0 })
            .collect();
        let (f, g) = field(&t, &[true; 16]);
        assert_eq!(orientation_continuity(&f, &g).unwrap().value, 0.0);
    }

    #[test]
    fn isolated_blocks_are_an_error() {
        let mut mask = [false; 16];
        mask[0] = true;
        mask[5] = true;
        let (f, g) = field(&[0.0; 16], &mask);
        assert!(orientation_continuity(&f, &g).is_err());
    }

    proptest! {
        #[test]
        fn matches_pair_enumeration(
            t in prop::collection::vec(0.0f64..PI, 16),
            mask in prop::collection::vec(any::<bool>(), 16),
        ) {
            let (f, g) = field(&t, &mask);
            match (orientation_continuity(&f, &g), brute_force(&t, &mask)) {
                (Ok(s), Some(o)) => prop_assert!((s.value - o).abs() < 1e-12),
                (Err(_), None) => {}
                (a, b) => prop_assert!(false, "{a:?} vs {b:?}"),
            }
        }

        #[test]
        fn invariant_to_global_rotation(
            t in prop::collection::vec(0.0f64..PI, 16),
            shift in 0.0f64..PI,
        ) {
            let (f, g) = field(&t, &[true; 16]);
            let shifted: Vec<f64> = t.iter().map(|x| (x + shift).rem_euclid(PI)).collect();
            let (f2, _) = field(&shifted, &[true; 16]);
            let a = orientation_continuity(&f, &g).unwrap().value;
            let b = orientation_continuity(&f2, &g).unwrap().value;
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
