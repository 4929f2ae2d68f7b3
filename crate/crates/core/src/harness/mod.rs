//! Dataset ingestion, metric orchestration and the subset comparison
//! protocol with its reports.

mod config;
mod manifest;
mod pipeline;
mod protocol;
mod report;
mod synth;

pub use config::{validate_weights, Config};
pub use manifest::{load_manifest, load_scores, parse_scores, scores_to_csv, DatasetManifest, ManifestEntry};
pub use pipeline::{
    assess_image, manifest_features, run_comparison, Comparison, ImageAnalysis, ImageRecord, MetricReport,
};
pub use protocol::{
    combined_quality, multiplicity_mean, normalize_subsets, rank_and_partition, subset_mean, subset_report,
    Normalization, SubsetReport, SubsetStats,
};
pub use report::{report_file_name, report_json, scores_csv, subsets_csv, write_reports, REPORT_SCHEMA_VERSION};
pub use synth::{
    generate_set, generate_synthetic, write_synthetic_set, Ellipse, OrientationMap, SynthScores, SynthSet,
    SynthSetSpec, SynthSpec,
};
