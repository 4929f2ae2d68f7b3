use serde::Serialize;

use crate::blocks::BlockGrid;
use crate::orientation::OrientationField;
use crate::ridge::RidgeStats;
use crate::score::{MetricId, QualityScore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LimLabel {
    Good,
    Undetermined,
    Bad,
    Blank,
}

/// Acceptance ranges for the four block features. Ridge thickness bounds are
/// the half-periods of the frequency bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimThresholds {
    pub min_coherence: f64,
    pub min_frequency: f64,
    pub max_frequency: f64,
    pub min_ridge_thickness: f64,
    pub max_ridge_thickness: f64,
    pub min_rv_ratio: f64,
    pub max_rv_ratio: f64,
}

impl Default for LimThresholds {
    fn default() -> Self {
        Self {
            min_coherence: 0.35,
            min_frequency: 1.0 / 25.0,
            max_frequency: 1.0 / 3.0,
            min_ridge_thickness: 1.5,
            max_ridge_thickness: 12.5,
            min_rv_ratio: 0.3,
            max_rv_ratio: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimResult {
    pub score: QualityScore,
    /// One label per block; background blocks are `Blank`.
    pub labels: Vec<LimLabel>,
    pub good: usize,
    pub undetermined: usize,
    pub bad: usize,
}

impl LimResult {
    /// `S_L = (G + U/2) / (G + U + B)`, 0 without foreground.
    pub fn from_labels(labels: Vec<LimLabel>) -> Self {
        let count = |l: LimLabel| labels.iter().filter(|&&x| x == l).count();
        let (g, u, b) = (
            count(LimLabel::Good),
            count(LimLabel::Undetermined),
            count(LimLabel::Bad),
        );
        let total = g + u + b;
        let value = if total == 0 {
            0.0
        } else {
            (g as f64 + 0.5 * u as f64) / total as f64
        };
        Self {
            score: QualityScore::new(MetricId::SL, value),
            labels,
            good: g,
            undetermined: u,
            bad: b,
        }
    }
}

/// Labels blocks by how many of the four features (coherence, frequency,
/// ridge thickness, ridge/valley ratio) fall outside their ranges: none is
/// Good, one is Undetermined, two or more is Bad.
pub fn lim_local_score(grid: &BlockGrid, field: &OrientationField, stats: &RidgeStats, t: &LimThresholds) -> LimResult {
    let labels = (0..grid.len())
        .map(|idx| {
            if !grid.is_foreground(idx) {
                return LimLabel::Blank;
            }
            let coh = field.get(idx).map_or(0.0, |o| o.coherence);
            let r = stats.get(idx);
            let checks = [
                coh >= t.min_coherence,
                r.is_some_and(|r| (t.min_frequency..=t.max_frequency).contains(&r.frequency)),
                r.and_then(|r| r.ridge_thickness)
                    .is_some_and(|w| (t.min_ridge_thickness..=t.max_ridge_thickness).contains(&w)),
                r.and_then(|r| r.rv_ratio)
                    .is_some_and(|q| (t.min_rv_ratio..=t.max_rv_ratio).contains(&q)),
            ];
            match checks.iter().filter(|&&ok| !ok).count() {
                0 => LimLabel::Good,
                1 => LimLabel::Undetermined,
                _ => LimLabel::Bad,
            }
        })
        .collect();
    LimResult::from_labels(labels)
}

/// Four-level block quality: Bad → 1, Undetermined → 2, Good with
/// coherence < 0.7 → 3, Good with coherence ≥ 0.7 → 4. Background → `None`.
pub fn block_quality_levels(lim: &LimResult, field: &OrientationField) -> Vec<Option<u8>> {
    lim.labels
        .iter()
        .enumerate()
        .map(|(idx, l)| match l {
            LimLabel::Blank => None,
            LimLabel::Bad => Some(1),
            LimLabel::Undetermined => Some(2),
            LimLabel::Good => {
                let coh = field.get(idx).map_or(0.0, |o| o.coherence);
                Some(if coh < 0.7 { 3 } else { 4 })
            }
        })
        .collect()
}
