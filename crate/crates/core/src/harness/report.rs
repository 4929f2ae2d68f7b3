//! Report files: `report_<metric>.json`, `scores.csv` and `subsets.csv`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::score::MetricId;

use super::config::Config;
use super::pipeline::{Comparison, MetricReport};
use super::protocol::SubsetStats;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

const NORMALIZATION_NOTE: &str = "subset means and individual scores are both mapped by \
q -> (q - offset) / scale, which sends the first subset mean to 0 and the last to 1; \
min, max and std are taken over the mapped individual scores (std is the sample std)";

#[derive(Serialize)]
struct NormalizationInfo {
    method: &'static str,
    offset: f64,
    scale: f64,
}

#[derive(Serialize)]
struct ReportFile<'a> {
    schema_version: u32,
    metric: MetricId,
    images: usize,
    subset_count: usize,
    excluded: &'a [String],
    normalization: NormalizationInfo,
    config: BTreeMap<&'static str, serde_json::Value>,
    subsets: &'a [SubsetStats],
}

fn config_json(config: &Config) -> BTreeMap<&'static str, serde_json::Value> {
    config
        .entries()
        .into_iter()
        .map(|(k, v)| {
            let value = serde_json::from_str(&v).unwrap_or(serde_json::Value::String(v));
            (k, value)
        })
        .collect()
}

/// The JSON document for one metric.
pub fn report_json(report: &MetricReport, config: &Config) -> Result<String> {
    let r = &report.report;
    let file = ReportFile {
        schema_version: REPORT_SCHEMA_VERSION,
        metric: r.metric,
        images: r.subsets.iter().map(|s| s.size).sum(),
        subset_count: r.subsets.len(),
        excluded: &report.excluded,
        normalization: NormalizationInfo {
            method: NORMALIZATION_NOTE,
            offset: r.normalization.offset,
            scale: r.normalization.scale,
        },
        config: config_json(config),
        subsets: &r.subsets,
    };
    let mut s = serde_json::to_string_pretty(&file)?;
    s.push('\n');
    Ok(s)
}

/// Per-image scores, one column per metric; failed entries are empty.
pub fn scores_csv(cmp: &Comparison) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["path".to_string()];
    header.extend(cmp.metrics.iter().map(|m| m.name().to_string()));
    w.write_record(&header)?;
    for rec in &cmp.images {
        let mut row = vec![rec.path.clone()];
        row.extend(rec.values.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Flat per-subset statistics for plotting, preceded by `#` comment lines
/// carrying the config.
pub fn subsets_csv(cmp: &Comparison, config: &Config) -> Result<String> {
    let mut out = String::new();
    let _ = writeln!(out, "# schema_version = {REPORT_SCHEMA_VERSION}");
    for (k, v) in config.entries() {
        let _ = writeln!(out, "# {k} = {v}");
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "metric",
        "subset",
        "size",
        "raw_mean",
        "normalized_mean",
        "min",
        "max",
        "std",
    ])?;
    for (m, r) in &cmp.reports {
        let Ok(r) = r else { continue };
        for s in &r.report.subsets {
            w.write_record([
                m.name().to_string(),
                s.index.to_string(),
                s.size.to_string(),
                s.raw_mean.to_string(),
                s.normalized_mean.to_string(),
                s.min.to_string(),
                s.max.to_string(),
                s.std.to_string(),
            ])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidParameter(e.to_string()))?;
    out.push_str(std::str::from_utf8(&bytes).expect("csv output is utf-8"));
    Ok(out)
}

pub fn report_file_name(metric: MetricId) -> String {
    format!("report_{}.json", metric.name())
}

/// Writes all report files into `dir` and returns their paths.
pub fn write_reports(dir: impl AsRef<Path>, cmp: &Comparison, config: &Config) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: String, text: String| -> Result<()> {
        let p = dir.join(name);
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        written.push(p);
        Ok(())
    };
    for (m, r) in &cmp.reports {
        if let Ok(r) = r {
            put(report_file_name(*m), report_json(r, config)?)?;
        }
    }
    put("scores.csv".into(), scores_csv(cmp)?)?;
    put("subsets.csv".into(), subsets_csv(cmp, config)?)?;
    Ok(written)
}
