use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{mean, sample_std};

/// Similarity scores of one sample: its genuine comparison and the impostor
/// comparisons against other subjects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    pub genuine: f64,
    pub impostors: Vec<f64>,
}

/// Separation of the genuine score from the impostor distribution in
/// impostor standard deviations: `(s_m - mean(s_n)) / std(s_n)`, sample std.
pub fn target_separation(scores: &ScoreSet) -> Result<f64> {
    if scores.impostors.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 impostor scores, got {}",
            scores.impostors.len()
        )));
    }
    let m = mean(&scores.impostors).unwrap_or(0.0);
    let s = sample_std(&scores.impostors).unwrap_or(0.0);
    if !(s > 0.0) {
        return Err(Error::Degenerate("impostor scores have zero spread".into()));
    }
    Ok((scores.genuine - m) / s)
}
