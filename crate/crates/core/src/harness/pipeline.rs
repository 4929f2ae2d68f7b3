//! Per-image metric evaluation and the dataset-level comparison run.

use std::cell::OnceCell;

use rayon::prelude::*;

use crate::blocks::{
    compute_centroid_weights, default_block_size, default_weight_sigma, partition_blocks, segment_foreground, BlockGrid,
};
use crate::classifier::{build_feature_vector, extract_minutiae_lite, predict_quality, FeatureVector, QualityNet};
use crate::error::{Error, Result};
use crate::global::{orientation_continuity_with_cap, ridge_uniformity_with_scale, spectrum_quality, SpectrumQuality};
use crate::image::GrayImage;
use crate::local::{
    block_quality_levels, chen_local_index, directional_quality, gabor_quality, hong_classify, label_map_json,
    lim_local_score, DirectionalResult, GaborResult, HongResult, LabelSources, LimResult,
};
use crate::orientation::{orientation_field, OrientationField};
use crate::ridge::{ridge_stats, RidgeStats};
use crate::score::{MetricId, QualityScore};

use super::config::Config;
use super::manifest::DatasetManifest;
use super::protocol::{combined_quality, subset_report, SubsetReport};

fn cached<T>(cell: &OnceCell<T>, f: impl FnOnce() -> Result<T>) -> Result<&T> {
    if let Some(v) = cell.get() {
        return Ok(v);
    }
    let v = f()?;
    Ok(cell.get_or_init(|| v))
}

/// Lazily computed intermediate results for one image. Each stage runs at
/// most once however many metrics need it.
pub struct ImageAnalysis<'a> {
    img: &'a GrayImage,
    config: &'a Config,
    grid: BlockGrid,
    field: OnceCell<OrientationField>,
    stats: OnceCell<RidgeStats>,
    lim: OnceCell<LimResult>,
    gabor: OnceCell<GaborResult>,
    directional: OnceCell<DirectionalResult>,
    spectrum: OnceCell<SpectrumQuality>,
}

impl<'a> ImageAnalysis<'a> {
    /// Partitions, segments and weights the image.
    pub fn new(img: &'a GrayImage, config: &'a Config) -> Result<Self> {
        let b = config.block_size.unwrap_or_else(|| default_block_size(img.dpi()));
        let grid = segment_foreground(img, &partition_blocks(img, b)?, &config.segment);
        let sigma = config.weight_sigma.or_else(|| default_weight_sigma(&grid));
        let grid = match sigma {
            Some(s) if grid.foreground_count() > 0 => compute_centroid_weights(&grid, s)?,
            _ => grid,
        };
        Ok(ImageAnalysis {
            img,
            config,
            grid,
            field: OnceCell::new(),
            stats: OnceCell::new(),
            lim: OnceCell::new(),
            gabor: OnceCell::new(),
            directional: OnceCell::new(),
            spectrum: OnceCell::new(),
        })
    }

    pub fn grid(&self) -> &BlockGrid {
        &self.grid
    }

    pub fn field(&self) -> &OrientationField {
        self.field.get_or_init(|| orientation_field(self.img, &self.grid))
    }

    pub fn ridge_stats(&self) -> &RidgeStats {
        self.stats
            .get_or_init(|| ridge_stats(self.img, &self.grid, self.field()))
    }

    pub fn lim(&self) -> Result<&LimResult> {
        cached(&self.lim, || {
            if self.grid.foreground_count() == 0 {
                return Err(Error::NoForeground);
            }
            Ok(lim_local_score(
                &self.grid,
                self.field(),
                self.ridge_stats(),
                &self.config.lim,
            ))
        })
    }

    pub fn hong(&self) -> HongResult {
        hong_classify(&self.grid, self.ridge_stats(), &self.config.hong)
    }

    pub fn gabor(&self) -> Result<&GaborResult> {
        cached(&self.gabor, || gabor_quality(self.img, &self.grid, &self.config.gabor))
    }

    pub fn directional(&self) -> Result<&DirectionalResult> {
        cached(&self.directional, || {
            directional_quality(self.img, &self.grid, &self.config.directional)
        })
    }

    pub fn spectrum(&self) -> Result<&SpectrumQuality> {
        cached(&self.spectrum, || spectrum_quality(self.img, &self.config.spectrum))
    }

    pub fn features(&self) -> Result<FeatureVector> {
        let minutiae = extract_minutiae_lite(self.img, &self.grid, self.field())?;
        let levels = block_quality_levels(self.lim()?, self.field());
        Ok(build_feature_vector(&self.grid, &minutiae, &levels))
    }

    /// One metric from pixels. `Q_M` is a manifest label and always errors
    /// here; `Q_N` needs a trained model.
    pub fn metric(&self, id: MetricId, model: Option<&QualityNet>) -> Result<QualityScore> {
        match id {
            MetricId::SL => self.lim().map(|r| r.score),
            MetricId::QS => chen_local_index(self.field(), &self.grid),
            MetricId::QI => self.gabor().map(|r| r.score),
            MetricId::QDir => self.directional().map(|r| r.score),
            MetricId::SGO => orientation_continuity_with_cap(self.field(), &self.grid, self.config.continuity_cap),
            MetricId::SGR => ridge_uniformity_with_scale(&self.ridge_stats().rv_ratios(), self.config.uniformity_scale),
            MetricId::QF => self.spectrum().map(|r| r.score),
            MetricId::QC => combined_quality(
                self.metric(MetricId::SL, model)?,
                self.metric(MetricId::SGO, model)?,
                self.metric(MetricId::SGR, model)?,
                self.config.combine_weights,
            ),
            MetricId::QN => {
                let net = model.ok_or_else(|| Error::InvalidParameter("Q_N requires a model file".into()))?;
                predict_quality(net, &self.features()?)
            }
            MetricId::QM => Err(Error::InvalidParameter(
                "Q_M is a manual label and only available from a manifest".into(),
            )),
        }
    }

    /// Per-block labels of every local method that succeeds, as JSON.
    pub fn label_map_json(&self) -> Result<String> {
        let hong = (self.grid.foreground_count() > 0).then(|| self.hong());
        let sources = LabelSources {
            lim: self.lim().ok(),
            hong: hong.as_ref(),
            gabor: self.gabor().ok(),
            directional: self.directional().ok(),
        };
        Ok(label_map_json(&self.grid, sources)?)
    }
}

/// Scores one image for each requested metric.
pub fn assess_image(
    img: &GrayImage,
    config: &Config,
    metrics: &[MetricId],
    model: Option<&QualityNet>,
) -> Result<Vec<(MetricId, Result<QualityScore>)>> {
    let a = ImageAnalysis::new(img, config)?;
    Ok(metrics.iter().map(|&m| (m, a.metric(m, model))).collect())
}

/// Scores of one manifest image, aligned with [`Comparison::metrics`].
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub path: String,
    pub values: Vec<Option<f64>>,
    pub errors: Vec<Option<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub report: SubsetReport,
    /// Images left out because the metric failed on them.
    pub excluded: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub metrics: Vec<MetricId>,
    pub subsets: usize,
    pub images: Vec<ImageRecord>,
    /// One outcome per metric; failures carry their message.
    pub reports: Vec<(MetricId, std::result::Result<MetricReport, String>)>,
}

impl Comparison {
    pub fn failed_metrics(&self) -> Vec<MetricId> {
        self.reports
            .iter()
            .filter(|(_, r)| r.is_err())
            .map(|(m, _)| *m)
            .collect()
    }
}

fn run_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Computes per-image feature vectors in manifest order on `workers` threads.
pub fn manifest_features(
    manifest: &DatasetManifest,
    config: &Config,
    workers: usize,
) -> Result<Vec<Result<FeatureVector>>> {
    run_pool(workers, || {
        manifest
            .entries
            .par_iter()
            .map(|e| {
                let img = GrayImage::load(manifest.resolve(e))?;
                ImageAnalysis::new(&img, config)?.features()
            })
            .collect()
    })
}

/// Scores every manifest image with every metric on `workers` threads,
/// then ranks, partitions and normalizes each metric. A metric that cannot
/// be computed fails on its own; images on which a metric fails are
/// excluded from that metric's ranking. Output does not depend on `workers`.
pub fn run_comparison(
    manifest: &DatasetManifest,
    metrics: &[MetricId],
    config: &Config,
    model: Option<&QualityNet>,
    workers: usize,
) -> Result<Comparison> {
    config.validate()?;
    let pixel_metrics: Vec<MetricId> = metrics.iter().copied().filter(|m| *m != MetricId::QM).collect();
    let computed: Vec<Vec<std::result::Result<f64, String>>> = run_pool(workers, || {
        manifest
            .entries
            .par_iter()
            .map(|e| {
                let scored = GrayImage::load(manifest.resolve(e))
                    .and_then(|img| assess_image(&img, config, &pixel_metrics, model));
                match scored {
                    Ok(list) => list
                        .into_iter()
                        .map(|(_, r)| r.map(|s| s.value).map_err(|e| e.to_string()))
                        .collect(),
                    Err(err) => vec![Err(err.to_string()); pixel_metrics.len()],
                }
            })
            .collect()
    })?;

    let mut images: Vec<ImageRecord> = manifest
        .entries
        .iter()
        .map(|e| ImageRecord {
            path: e.path.clone(),
            values: Vec::new(),
            errors: Vec::new(),
        })
        .collect();
    for (rec, (entry, row)) in images.iter_mut().zip(manifest.entries.iter().zip(&computed)) {
        let mut row = row.iter();
        for &m in metrics {
            let r = if m == MetricId::QM {
                entry
                    .qm
                    .map(|q| f64::from(q) / 9.0)
                    .ok_or_else(|| "no manual quality label".to_string())
            } else {
                row.next().expect("one result per pixel metric").clone()
            };
            rec.values.push(r.as_ref().ok().copied());
            rec.errors.push(r.err());
        }
    }

    let reports = metrics
        .iter()
        .enumerate()
        .map(|(k, &m)| {
            let outcome = if m == MetricId::QN && model.is_none() {
                Err("Q_N requires a model file".to_string())
            } else if m == MetricId::QM && images.iter().any(|r| r.values[k].is_none()) {
                Err("manifest lacks manual quality labels".to_string())
            } else {
                let (ok, bad): (Vec<&ImageRecord>, Vec<&ImageRecord>) =
                    images.iter().partition(|r| r.values[k].is_some());
                let ids: Vec<String> = ok.iter().map(|r| r.path.clone()).collect();
                let scores: Vec<f64> = ok.iter().map(|r| r.values[k].unwrap()).collect();
                subset_report(m, &ids, &scores, config.subsets)
                    .map(|report| MetricReport {
                        report,
                        excluded: bad.iter().map(|r| r.path.clone()).collect(),
                    })
                    .map_err(|e| e.to_string())
            };
            (m, outcome)
        })
        .collect();

    Ok(Comparison {
        metrics: metrics.to_vec(),
        subsets: config.subsets,
        images,
        reports,
    })
}
