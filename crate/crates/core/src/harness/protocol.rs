//! Ranking into equal subsets, subset means and their normalization.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::score::{MetricId, QualityScore};
use crate::stats::{sample_std, ExactSum};

use super::config::validate_weights;

/// `Q_C = w1·S_L + w2·S_GO + w3·S_GR`.
pub fn combined_quality(
    s_l: QualityScore,
    s_go: QualityScore,
    s_gr: QualityScore,
    weights: [f64; 3],
) -> Result<QualityScore> {
    validate_weights(&weights)?;
    let v = weights[0] * s_l.value + weights[1] * s_go.value + weights[2] * s_gr.value;
    Ok(QualityScore::new(MetricId::QC, v))
}

/// Stable ascending sort (ties keep input order) split into `m` contiguous
/// groups. Group sizes are `⌊N/m⌋` or `⌈N/m⌉`, larger groups first.
pub fn rank_and_partition(scores: &[f64], m: usize) -> Result<Vec<Vec<usize>>> {
    if m == 0 {
        return Err(Error::InvalidParameter("subset count must be positive".into()));
    }
    if scores.len() < m {
        return Err(Error::InsufficientData(format!(
            "{} images cannot fill {m} subsets",
            scores.len()
        )));
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::InvalidParameter(format!("score {i} is NaN")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let (base, extra) = (scores.len() / m, scores.len() % m);
    let mut out = Vec::with_capacity(m);
    let mut start = 0;
    for i in 0..m {
        let size = base + usize::from(i < extra);
        out.push(order[start..start + size].to_vec());
        start += size;
    }
    Ok(out)
}

/// Arithmetic mean with a correctly rounded sum.
pub fn subset_mean(scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::InsufficientData("empty subset".into()));
    }
    let mut acc = ExactSum::new();
    for &s in scores {
        acc.add(s);
    }
    Ok(acc.value() / scores.len() as f64)
}

/// The multiplicity form: `(1/N) Σ_v v·n(v)` over distinct values `v`.
/// Equal to [`subset_mean`] bit for bit.
pub fn multiplicity_mean(scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::InsufficientData("empty subset".into()));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut acc = ExactSum::new();
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i];
        let n = sorted[i..].iter().take_while(|&&x| x.to_bits() == v.to_bits()).count();
        acc.add_product(v, n as f64);
        i += n;
    }
    Ok(acc.value() / scores.len() as f64)
}

/// Affine map `q ↦ (q - offset) / scale` sending the first subset mean to 0
/// and the last to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Normalization {
    pub offset: f64,
    pub scale: f64,
}

impl Normalization {
    pub fn apply(&self, q: f64) -> f64 {
        (q - self.offset) / self.scale
    }
}

/// Normalized subset means and the map that produced them.
pub fn normalize_subsets(means: &[f64]) -> Result<(Vec<f64>, Normalization)> {
    let (Some(&first), Some(&last)) = (means.first(), means.last()) else {
        return Err(Error::InsufficientData("no subset means".into()));
    };
    let scale = last - first;
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::Degenerate(format!(
            "last subset mean {last} does not exceed the first {first}"
        )));
    }
    let map = Normalization { offset: first, scale };
    Ok((means.iter().map(|&q| map.apply(q)).collect(), map))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetStats {
    /// 1-based subset index, lowest quality first.
    pub index: usize,
    pub size: usize,
    pub raw_mean: f64,
    pub normalized_mean: f64,
    pub min: f64,
    pub max: f64,
    /// Sample std of the normalized scores, 0 for a single image.
    pub std: f64,
    /// Image identifiers ordered by increasing score.
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetReport {
    pub metric: MetricId,
    pub normalization: Normalization,
    pub subsets: Vec<SubsetStats>,
}

/// Runs the full protocol for one metric: rank, partition, subset means,
/// normalization and per-subset statistics of normalized scores.
pub fn subset_report(metric: MetricId, ids: &[String], scores: &[f64], m: usize) -> Result<SubsetReport> {
    if ids.len() != scores.len() {
        return Err(Error::InvalidParameter("ids and scores differ in length".into()));
    }
    let groups = rank_and_partition(scores, m)?;
    let values: Vec<Vec<f64>> = groups.iter().map(|g| g.iter().map(|&i| scores[i]).collect()).collect();
    let means = values.iter().map(|v| subset_mean(v)).collect::<Result<Vec<_>>>()?;
    let (normalized, map) = normalize_subsets(&means)?;
    let subsets = groups
        .iter()
        .zip(&values)
        .enumerate()
        .map(|(i, (g, v))| {
            let nv: Vec<f64> = v.iter().map(|&q| map.apply(q)).collect();
            SubsetStats {
                index: i + 1,
                size: g.len(),
                raw_mean: means[i],
                normalized_mean: normalized[i],
                min: nv.iter().copied().fold(f64::INFINITY, f64::min),
                max: nv.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                std: sample_std(&nv).unwrap_or(0.0),
                members: g.iter().map(|&j| ids[j].clone()).collect(),
            }
        })
        .collect();
    Ok(SubsetReport {
        metric,
        normalization: map,
        subsets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(m: MetricId, v: f64) -> QualityScore {
        QualityScore::new(m, v)
    }

    #[test]
    fn combination() {
        let w = [1.0 / 3.0; 3];
        let c = combined_quality(q(MetricId::SL, 0.6), q(MetricId::SGO, 0.9), q(MetricId::SGR, 0.3), w).unwrap();
        assert!((c.value - 0.6).abs() < 1e-15);
        assert_eq!(c.metric, MetricId::QC);
        let ones = combined_quality(
            q(MetricId::SL, 1.0),
            q(MetricId::SGO, 1.0),
            q(MetricId::SGR, 1.0),
            [0.2, 0.3, 0.5],
        )
        .unwrap();
        assert!((ones.value - 1.0).abs() < 1e-15);
        let zeros = combined_quality(q(MetricId::SL, 0.0), q(MetricId::SGO, 0.0), q(MetricId::SGR, 0.0), w).unwrap();
        assert_eq!(zeros.value, 0.0);
        assert!(combined_quality(
            q(MetricId::SL, 0.0),
            q(MetricId::SGO, 0.0),
            q(MetricId::SGR, 0.0),
            [0.5, 0.5, 0.5]
        )
        .is_err());
    }

    #[test]
    fn partition_examples() {
        let g = rank_and_partition(&[3.0, 1.0, 2.0], 3).unwrap();
        assert_eq!(g, vec![vec![1], vec![2], vec![0]]);
        let g = rank_and_partition(&[0.5; 10], 5).unwrap();
        assert!(g.iter().all(|s| s.len() == 2));
        // ties keep manifest order
        assert_eq!(g.concat(), (0..10).collect::<Vec<_>>());
        let g = rank_and_partition(&vec![0.0; 9000], 5).unwrap();
        assert!(g.iter().all(|s| s.len() == 1800));
        let g = rank_and_partition(&[0.0; 7], 5).unwrap();
        assert_eq!(g.iter().map(Vec::len).collect::<Vec<_>>(), vec![2, 2, 1, 1, 1]);
        assert!(rank_and_partition(&[1.0; 4], 5).is_err());
    }

    #[test]
    fn means() {
        assert!((subset_mean(&[0.2, 0.4]).unwrap() - 0.3).abs() < 1e-16);
        assert_eq!(subset_mean(&[0.7; 5]).unwrap(), 0.7);
        let v = [0.1, 0.1, 0.1, 0.5];
        assert_eq!(multiplicity_mean(&v).unwrap(), subset_mean(&v).unwrap());
        assert!((subset_mean(&v).unwrap() - 0.2).abs() < 1e-16);
        assert!(subset_mean(&[]).is_err());
    }

    #[test]
    fn normalization() {
        let (n, _) = normalize_subsets(&[0.1, 0.3, 0.4, 0.6, 0.9]).unwrap();
        let want = [0.0, 0.25, 0.375, 0.625, 1.0];
        for (a, b) in n.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!((n[0], n[4]), (0.0, 1.0));
        assert!(matches!(normalize_subsets(&[0.5; 5]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn report_shape() {
        let ids: Vec<String> = (0..12).map(|i| format!("img{i}")).collect();
        let scores: Vec<f64> = (0..12).map(|i| ((i * 7) % 12) as f64 / 11.0).collect();
        let r = subset_report(MetricId::QS, &ids, &scores, 5).unwrap();
        assert_eq!(r.subsets.len(), 5);
        assert_eq!(r.subsets[0].normalized_mean, 0.0);
        assert_eq!(r.subsets[4].normalized_mean, 1.0);
        assert_eq!(r.subsets.iter().map(|s| s.size).sum::<usize>(), 12);
        for s in &r.subsets {
            assert!(s.min <= s.normalized_mean && s.normalized_mean <= s.max);
        }
    }

    proptest! {
        #[test]
        fn partition_is_balanced_permutation(scores in prop::collection::vec(0.0f64..1.0, 5..200), m in 1usize..6) {
            let g = rank_and_partition(&scores, m).unwrap();
            let sizes: Vec<usize> = g.iter().map(Vec::len).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            prop_assert!(sizes.windows(2).all(|w| w[0] >= w[1]));
            let mut all = g.concat();
            all.sort();
            prop_assert_eq!(all, (0..scores.len()).collect::<Vec<_>>());
            let flat: Vec<f64> = g.concat().iter().map(|&i| scores[i]).collect();
            prop_assert!(flat.windows(2).all(|w| w[0] <= w[1]));
        }

        #[test]
        fn multiplicity_form_is_exact(vals in prop::collection::vec(prop::sample::select(vec![0.1, 0.2, 0.35, 0.5, 0.8, 1.0 / 3.0]), 1..300)) {
            prop_assert_eq!(multiplicity_mean(&vals).unwrap().to_bits(), subset_mean(&vals).unwrap().to_bits());
        }

        #[test]
        fn rank_invariance(scores in prop::collection::vec(-1.0f64..1.0, 5..100)) {
            let t: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() + 2.0).collect();
            prop_assert_eq!(rank_and_partition(&scores, 5).unwrap(), rank_and_partition(&t, 5).unwrap());
        }

        #[test]
        fn normalized_means_monotone(scores in prop::collection::vec(0.0f64..1.0, 10..200)) {
            let ids: Vec<String> = (0..scores.len()).map(|i| i.to_string()).collect();
            if let Ok(r) = subset_report(MetricId::QF, &ids, &scores, 5) {
                prop_assert!(r.subsets.windows(2).all(|w| w[0].normalized_mean <= w[1].normalized_mean));
                prop_assert_eq!(r.subsets[0].normalized_mean, 0.0);
                prop_assert_eq!(r.subsets[4].normalized_mean, 1.0);
            }
        }
    }
}
