use serde::Serialize;

use crate::blocks::BlockGrid;
use crate::ridge::RidgeStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HongLabel {
    Recoverable,
    Unrecoverable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RejectReason {
    TooManyUnrecoverable,
    NoForeground,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Decision {
    Accept,
    Reject(RejectReason),
}

/// Recoverability thresholds on the sinusoid parameters. These defaults are
/// tuned for 500 dpi and are not from the original method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HongThresholds {
    pub min_amplitude: f64,
    pub min_frequency: f64,
    pub max_frequency: f64,
    /// Residual variance limit as a fraction of amplitude².
    pub max_variance_ratio: f64,
    /// Reject when the unrecoverable fraction is strictly above this.
    pub reject_fraction: f64,
}

impl Default for HongThresholds {
    fn default() -> Self {
        Self {
            min_amplitude: 15.0,
            min_frequency: 1.0 / 25.0,
            max_frequency: 1.0 / 3.0,
            max_variance_ratio: 0.25,
            reject_fraction: 0.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HongResult {
    pub labels: Vec<Option<HongLabel>>,
    pub unrecoverable_fraction: f64,
    pub decision: Decision,
}

/// Labels foreground blocks recoverable or not and decides acceptance.
/// Blocks without valid ridge statistics count as unrecoverable.
pub fn hong_classify(grid: &BlockGrid, stats: &RidgeStats, t: &HongThresholds) -> HongResult {
    let mut labels = vec![None; grid.len()];
    let mut total = 0usize;
    let mut bad = 0usize;
    for idx in grid.foreground_indices() {
        let ok = stats.get(idx).is_some_and(|r| {
            r.amplitude >= t.min_amplitude
                && (t.min_frequency..=t.max_frequency).contains(&r.frequency)
                && r.variance <= t.max_variance_ratio * r.amplitude * r.amplitude
        });
        total += 1;
        if !ok {
            bad += 1;
        }
        labels[idx] = Some(if ok {
            HongLabel::Recoverable
        } else {
            HongLabel::Unrecoverable
        });
    }
    if total == 0 {
        return HongResult {
            labels,
            unrecoverable_fraction: 1.0,
            decision: Decision::Reject(RejectReason::NoForeground),
        };
    }
    let fraction = bad as f64 / total as f64;
    let decision = if fraction > t.reject_fraction {
        Decision::Reject(RejectReason::TooManyUnrecoverable)
    } else {
        Decision::Accept
    };
    HongResult {
        labels,
        unrecoverable_fraction: fraction,
        decision,
    }
}
