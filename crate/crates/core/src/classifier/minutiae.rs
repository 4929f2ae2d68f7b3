use serde::{Deserialize, Serialize};

use crate::blocks::{block_mean_std, BlockGrid};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::orientation::OrientationField;

/// Minutiae closer than this to background or the image edge are dropped.
pub const BORDER_MARGIN: usize = 8;
/// Endings whose branch reaches a bifurcation (or another ending) in fewer
/// steps than this are treated as spurs.
pub const MIN_SPUR_LENGTH: usize = 5;

/// Std of a block at which minutia reliability saturates.
const CONTRAST_SATURATION: f64 = 64.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MinutiaKind {
    Ending,
    Bifurcation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Minutia {
    pub x: usize,
    pub y: usize,
    pub kind: MinutiaKind,
    /// Reliability in [0, 1].
    pub quality: f64,
}

/// Binary raster, `true` marks ridge pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

// Clockwise from north: N, NE, E, SE, S, SW, W, NW.
const OFFSETS: [(isize, isize); 8] = [(0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1)];

impl BinaryImage {
    pub fn new(width: usize, height: usize) -> Self {
        BinaryImage {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: isize, y: isize) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.data[y as usize * self.width + x as usize]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// The 8 neighbours of `(x, y)` clockwise from north; outside is `false`.
    pub fn neighbours(&self, x: usize, y: usize) -> [bool; 8] {
        OFFSETS.map(|(dx, dy)| self.get(x as isize + dx, y as isize + dy))
    }
}

/// Crossing number `½ Σ |P_i - P_{i+1}|` over the cyclic neighbour ring.
pub fn crossing_number(n: [bool; 8]) -> u8 {
    let changes = (0..8).filter(|&i| n[i] != n[(i + 1) % 8]).count();
    (changes / 2) as u8
}

/// Marks foreground pixels darker than their block mean as ridge.
pub fn binarize(img: &GrayImage, grid: &BlockGrid) -> BinaryImage {
    let mut out = BinaryImage::new(img.width(), img.height());
    for idx in grid.foreground_indices() {
        let rect = grid.rect(idx);
        let (mean, _) = block_mean_std(img, rect);
        for (x, y) in rect.pixels() {
            if f64::from(img.get(x, y)) < mean {
                out.set(x, y, true);
            }
        }
    }
    out
}

/// Zhang-Suen thinning to a one-pixel-wide skeleton.
pub fn thin(binary: &BinaryImage) -> BinaryImage {
    let mut img = binary.clone();
    let mut to_clear = Vec::new();
    loop {
        let mut changed = false;
        for step in 0..2 {
            to_clear.clear();
            for y in 0..img.height {
                for x in 0..img.width {
                    if !img.data[y * img.width + x] {
                        continue;
                    }
                    let n = img.neighbours(x, y);
                    let b = n.iter().filter(|&&v| v).count();
                    if !(2..=6).contains(&b) || crossing_number(n) != 1 {
                        continue;
                    }
                    let [p2, _, p4, _, p6, _, p8, _] = n;
                    let ok = if step == 0 {
                        !(p2 && p4 && p6) && !(p4 && p6 && p8)
                    } else {
                        !(p2 && p4 && p8) && !(p2 && p6 && p8)
                    };
                    if ok {
                        to_clear.push(y * img.width + x);
                    }
                }
            }
            changed |= !to_clear.is_empty();
            for &i in &to_clear {
                img.data[i] = false;
            }
        }
        if !changed {
            return img;
        }
    }
}

fn kind_at(skel: &BinaryImage, x: usize, y: usize) -> Option<MinutiaKind> {
    if !skel.get(x as isize, y as isize) {
        return None;
    }
    match crossing_number(skel.neighbours(x, y)) {
        1 => Some(MinutiaKind::Ending),
        3 => Some(MinutiaKind::Bifurcation),
        _ => None,
    }
}

enum Trace {
    Long,
    Bifurcation(usize, usize),
    Ending(usize, usize),
}

// Follows the branch from an ending for up to MIN_SPUR_LENGTH steps.
fn trace_branch(skel: &BinaryImage, x0: usize, y0: usize) -> Trace {
    let mut visited = vec![(x0, y0)];
    let (mut x, mut y) = (x0, y0);
    for _ in 0..MIN_SPUR_LENGTH {
        let candidates: Vec<(usize, usize)> = OFFSETS
            .iter()
            .filter(|&&(dx, dy)| skel.get(x as isize + dx, y as isize + dy))
            .map(|&(dx, dy)| ((x as isize + dx) as usize, (y as isize + dy) as usize))
            .filter(|p| !visited.contains(p))
            .collect();
        let next = candidates
            .iter()
            .find(|&&(cx, cy)| kind_at(skel, cx, cy) == Some(MinutiaKind::Bifurcation))
            .or_else(|| candidates.iter().find(|&&(cx, cy)| cx == x || cy == y))
            .or(candidates.first());
        let Some(&(nx, ny)) = next else {
            return Trace::Ending(x, y);
        };
        visited.push((nx, ny));
        x = nx;
        y = ny;
        match kind_at(skel, x, y) {
            Some(MinutiaKind::Bifurcation) => return Trace::Bifurcation(x, y),
            Some(MinutiaKind::Ending) => return Trace::Ending(x, y),
            None => {}
        }
    }
    Trace::Long
}

/// Crossing-number minutiae on a skeleton, after spur pruning and border
/// suppression. `mask` (one flag per pixel) restricts detection to the
/// foreground; `None` means the whole image.
pub fn detect_minutiae(skel: &BinaryImage, mask: Option<&[bool]>, border: usize) -> Vec<(usize, usize, MinutiaKind)> {
    let mut found = Vec::new();
    for y in 0..skel.height {
        for x in 0..skel.width {
            if let Some(k) = kind_at(skel, x, y) {
                found.push((x, y, k));
            }
        }
    }
    let mut dropped = std::collections::HashSet::new();
    for &(x, y, k) in &found {
        if k != MinutiaKind::Ending {
            continue;
        }
        match trace_branch(skel, x, y) {
            Trace::Long => {}
            Trace::Bifurcation(bx, by) => {
                dropped.insert((x, y));
                dropped.insert((bx, by));
            }
            Trace::Ending(ex, ey) => {
                dropped.insert((x, y));
                dropped.insert((ex, ey));
            }
        }
    }
    let r = border as isize;
    let inside = |x: usize, y: usize| {
        for dy in -r..=r {
            for dx in -r..=r {
                if dx * dx + dy * dy > r * r {
                    continue;
                }
                let (px, py) = (x as isize + dx, y as isize + dy);
                if px < 0 || py < 0 || px as usize >= skel.width || py as usize >= skel.height {
                    return false;
                }
                if let Some(m) = mask {
                    if !m[py as usize * skel.width + px as usize] {
                        return false;
                    }
                }
            }
        }
        true
    };
    found
        .into_iter()
        .filter(|&(x, y, _)| !dropped.contains(&(x, y)) && inside(x, y))
        .collect()
}

/// Lightweight minutiae extraction: block-mean binarization, thinning,
/// crossing numbers. Quality is the block coherence scaled by contrast.
pub fn extract_minutiae_lite(img: &GrayImage, grid: &BlockGrid, field: &OrientationField) -> Result<Vec<Minutia>> {
    if grid.foreground_count() == 0 {
        return Err(Error::NoForeground);
    }
    let skel = thin(&binarize(img, grid));
    let mask = grid.pixel_mask();
    let raw = detect_minutiae(&skel, Some(&mask), BORDER_MARGIN);
    let mut block_std = vec![None; grid.len()];
    Ok(raw
        .into_iter()
        .map(|(x, y, kind)| {
            let idx = grid.block_of(x, y);
            let std = *block_std[idx].get_or_insert_with(|| block_mean_std(img, grid.rect(idx)).1);
            let coherence = field.get(idx).map_or(0.0, |o| o.coherence);
            let quality = (coherence * (std / CONTRAST_SATURATION).min(1.0)).clamp(0.0, 1.0);
            Minutia { x, y, kind, quality }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::{partition_blocks, segment_foreground, SegmentParams};
    use crate::orientation::orientation_field;

    fn from_points(w: usize, h: usize, pts: &[(usize, usize)]) -> BinaryImage {
        let mut b = BinaryImage::new(w, h);
        for &(x, y) in pts {
            b.set(x, y, true);
        }
        b
    }

    fn counts(ms: &[(usize, usize, MinutiaKind)]) -> (usize, usize) {
        let e = ms.iter().filter(|m| m.2 == MinutiaKind::Ending).count();
        (e, ms.len() - e)
    }

    #[test]
    fn crossing_number_truth_table() {
        for bits in 0u16..256 {
            let n: [bool; 8] = std::array::from_fn(|i| bits >> i & 1 == 1);
            // count 0->1 transitions around the ring
            let rises = (0..8).filter(|&i| !n[i] && n[(i + 1) % 8]).count();
            assert_eq!(crossing_number(n) as usize, rises, "pattern {bits:08b}");
        }
        let mut n = [false; 8];
        n[0] = true;
        assert_eq!(crossing_number(n), 1);
        n[4] = true;
        assert_eq!(crossing_number(n), 2);
        n[2] = true;
        assert_eq!(crossing_number(n), 3);
    }

    #[test]
    fn straight_line_has_two_endings() {
        let pts: Vec<_> = (17..47).map(|x| (x, 32)).collect();
        let skel = thin(&from_points(64, 64, &pts));
        assert_eq!(skel.count(), 30);
        assert_eq!(counts(&detect_minutiae(&skel, None, BORDER_MARGIN)), (2, 0));
    }

    #[test]
    fn y_shape() {
        let mut pts = vec![(32, 32)];
        for k in 1..=12 {
            pts.push((32, 32 - k));
            pts.push((32 - k, 32 + k));
            pts.push((32 + k, 32 + k));
        }
        let skel = thin(&from_points(64, 64, &pts));
        assert_eq!(skel.count(), pts.len());
        assert_eq!(counts(&detect_minutiae(&skel, None, BORDER_MARGIN)), (3, 1));
    }

    #[test]
    fn short_spur_is_pruned() {
        let mut pts: Vec<_> = (10..54).map(|x| (x, 32)).collect();
        for k in 1..=3 {
            pts.push((32, 32 - k));
        }
        let skel = from_points(64, 64, &pts);
        assert_eq!(counts(&detect_minutiae(&skel, None, 4)), (2, 0));
    }

    #[test]
    fn border_suppression() {
        let pts: Vec<_> = (2..30).map(|x| (x, 32)).collect();
        let skel = from_points(64, 64, &pts);
        let ms = detect_minutiae(&skel, None, BORDER_MARGIN);
        assert_eq!(ms.len(), 1);
        assert_eq!((ms[0].0, ms[0].1), (29, 32));
    }

    #[test]
    fn thinning_reduces_thick_bar() {
        let mut b = BinaryImage::new(60, 30);
        for y in 12..18 {
            for x in 10..50 {
                b.set(x, y, true);
            }
        }
        let skel = thin(&b);
        assert!(skel.count() < 45 && skel.count() > 30, "{}", skel.count());
        for x in 0..60 {
            let col = (0..30).filter(|&y| skel.get(x, y)).count();
            assert!(col <= 1, "column {x} has {col} pixels");
        }
    }

    #[test]
    fn lite_extraction_on_ridges() {
        // ridges with a break in the middle produce endings
        let img = GrayImage::from_fn(128, 128, |x, y| {
            let v = 128.0 + 100.0 * (2.0 * std::f64::consts::PI * x as f64 / 9.0).cos();
            if (60..68).contains(&y) && (40..90).contains(&x) {
                200
            } else {
                v.round() as u8
            }
        })
        .unwrap();
        let grid = segment_foreground(&img, &partition_blocks(&img, 16).unwrap(), &SegmentParams::default());
        let field = orientation_field(&img, &grid);
        let ms = extract_minutiae_lite(&img, &grid, &field).unwrap();
        assert!(!ms.is_empty());
        assert!(ms.iter().all(|m| (0.0..=1.0).contains(&m.quality)));
        assert!(ms.iter().all(|m| m.x >= 8 && m.x < 120 && m.y >= 8 && m.y < 120));
    }

    #[test]
    fn no_foreground_errors() {
        let img = GrayImage::new(64, 64, vec![255; 64 * 64]).unwrap();
        let grid = segment_foreground(&img, &partition_blocks(&img, 16).unwrap(), &SegmentParams::default());
        let field = orientation_field(&img, &grid);
        assert!(matches!(
            extract_minutiae_lite(&img, &grid, &field),
            Err(Error::NoForeground)
        ));
    }
}
