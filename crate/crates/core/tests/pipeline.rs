use std::fs;

use fpq_core::harness::{
    load_manifest, load_scores, report_json, run_comparison, write_reports, write_synthetic_set, Config,
    OrientationMap, SynthScores, SynthSetSpec, SynthSpec, REPORT_SCHEMA_VERSION,
};
use fpq_core::MetricId;

fn ladder(count: usize, seed: u64) -> SynthSetSpec {
    SynthSetSpec {
        count,
        base: SynthSpec {
            width: 112,
            height: 112,
            orientation: OrientationMap::Concentric { cx: 56.0, cy: 10.0 },
            period: 8.0,
            seed,
            ..SynthSpec::default()
        },
        noise: [70.0, 5.0],
        contrast: [70.0, 170.0],
        blur: [0, 0],
        scores: Some(SynthScores {
            impostors: 12,
            separation: [0.5, 8.0],
            degenerate_fraction: 0.0,
        }),
    }
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        for &k in &idx[i..=j] {
            r[k] = (i + j) as f64 / 2.0;
        }
        i = j + 1;
    }
    r
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn metrics_track_the_quality_ladder() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_synthetic_set(&ladder(25, 3), dir.path()).unwrap();
    let mut metrics = vec![MetricId::QM];
    metrics.extend(MetricId::IMAGE);
    let cmp = run_comparison(&manifest, &metrics, &Config::default(), None, 1).unwrap();
    let t: Vec<f64> = (0..25).map(|i| i as f64 / 24.0).collect();
    for (k, (m, r)) in cmp.reports.iter().enumerate() {
        let r = r.as_ref().unwrap_or_else(|e| panic!("{m}: {e}"));
        assert!(r.excluded.is_empty(), "{m} excluded {:?}", r.excluded);
        let means: Vec<f64> = r.report.subsets.iter().map(|s| s.normalized_mean).collect();
        assert_eq!(means.len(), 5);
        assert_eq!(means[0], 0.0, "{m}");
        assert_eq!(means[4], 1.0, "{m}");
        assert!(means.windows(2).all(|w| w[0] <= w[1]), "{m}: {means:?}");
        let values: Vec<f64> = cmp.images.iter().map(|rec| rec.values[k].unwrap()).collect();
        let rho = spearman(&values, &t);
        assert!(rho > 0.5, "{m}: rank correlation with the ladder {rho}");
    }
}

#[test]
fn worker_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_synthetic_set(&ladder(12, 5), dir.path()).unwrap();
    let metrics = [MetricId::QS, MetricId::QF, MetricId::QDir, MetricId::QC];
    let cfg = Config {
        subsets: 3,
        ..Config::default()
    };
    let one = run_comparison(&manifest, &metrics, &cfg, None, 1).unwrap();
    let three = run_comparison(&manifest, &metrics, &cfg, None, 3).unwrap();
    assert_eq!(one, three);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    write_reports(&a, &one, &cfg).unwrap();
    write_reports(&b, &three, &cfg).unwrap();
    for f in fs::read_dir(&a).unwrap() {
        let name = f.unwrap().file_name();
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap());
    }
}

#[test]
fn missing_labels_fail_only_the_manual_metric() {
    let dir = tempfile::tempdir().unwrap();
    let mut manifest = write_synthetic_set(&ladder(10, 9), dir.path()).unwrap();
    manifest.entries[4].qm = None;
    let cfg = Config {
        subsets: 2,
        ..Config::default()
    };
    let cmp = run_comparison(&manifest, &[MetricId::QM, MetricId::QS], &cfg, None, 1).unwrap();
    assert_eq!(cmp.failed_metrics(), vec![MetricId::QM]);
    assert!(cmp.images[4].errors[0].is_some());
    assert!(cmp.reports[1].1.is_ok());
}

#[test]
fn quality_net_without_model_fails_on_its_own() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_synthetic_set(&ladder(6, 2), dir.path()).unwrap();
    let cfg = Config {
        subsets: 2,
        ..Config::default()
    };
    let cmp = run_comparison(&manifest, &[MetricId::QN, MetricId::QF], &cfg, None, 1).unwrap();
    assert_eq!(cmp.failed_metrics(), vec![MetricId::QN]);
}

#[test]
fn unreadable_images_are_excluded() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_synthetic_set(&ladder(9, 4), dir.path()).unwrap();
    let gone = manifest.entries[2].path.clone();
    fs::remove_file(dir.path().join(&gone)).unwrap();
    let cfg = Config {
        subsets: 2,
        ..Config::default()
    };
    let cmp = run_comparison(&manifest, &[MetricId::QS], &cfg, None, 1).unwrap();
    let r = cmp.reports[0].1.as_ref().unwrap();
    assert_eq!(r.excluded, vec![gone]);
    assert_eq!(r.report.subsets.iter().map(|s| s.size).sum::<usize>(), 8);
    assert!(cmp.images[2].values[0].is_none());
}

#[test]
fn report_document_layout() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_synthetic_set(&ladder(10, 8), dir.path()).unwrap();
    let cfg = Config {
        subsets: 5,
        ..Config::default()
    };
    let cmp = run_comparison(&manifest, &[MetricId::QF], &cfg, None, 1).unwrap();
    let text = report_json(cmp.reports[0].1.as_ref().unwrap(), &cfg).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["schema_version"], REPORT_SCHEMA_VERSION);
    assert_eq!(v["metric"], "Q_F");
    assert_eq!(v["images"], 10);
    assert_eq!(v["subset_count"], 5);
    assert_eq!(v["config"]["subsets"], 5);
    assert!(v["normalization"]["scale"].as_f64().unwrap() > 0.0);
    let subsets = v["subsets"].as_array().unwrap();
    assert_eq!(subsets[0]["normalized_mean"], 0.0);
    assert_eq!(subsets[4]["normalized_mean"], 1.0);
    assert_eq!(subsets[2]["members"].as_array().unwrap().len(), 2);
}

#[test]
fn written_set_reloads() {
    let dir = tempfile::tempdir().unwrap();
    let written = write_synthetic_set(&ladder(7, 1), dir.path()).unwrap();
    let loaded = load_manifest(dir.path().join("manifest.csv")).unwrap();
    let scores = load_scores(dir.path().join("scores.csv")).unwrap();
    assert_eq!(loaded.len(), 7);
    for (a, b) in written.entries.iter().zip(&loaded.entries) {
        assert_eq!(
            (&a.path, &a.subject, &a.finger, a.qm),
            (&b.path, &b.subject, &b.finger, b.qm)
        );
        assert_eq!(a.scores.as_ref(), Some(&scores[&a.path]));
    }
}
