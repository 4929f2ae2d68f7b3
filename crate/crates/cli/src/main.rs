//! `fpq`: fingerprint image quality from the command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 some requested
//! metrics failed while others succeeded.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fpq_core::classifier::{target_separation, train_quality_net, QualityNet};
use fpq_core::harness::{
    load_manifest, load_scores, manifest_features, run_comparison, write_reports, write_synthetic_set, Config,
    ImageAnalysis, SynthSetSpec,
};
use fpq_core::{Error, GrayImage, MetricId};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "fpq",
    version,
    about = "Fingerprint image quality metrics and comparison harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score one image.
    Quality {
        /// PGM or PNG image.
        image: PathBuf,
        /// Comma-separated metric names (default: every pixel metric).
        #[arg(long)]
        metrics: Option<String>,
        /// Block side in pixels (default: scaled from the image resolution).
        #[arg(long)]
        block_size: Option<usize>,
        /// Print a JSON object instead of tab-separated lines.
        #[arg(long)]
        json: bool,
        /// Trained model, needed for Q_N.
        #[arg(long)]
        model: Option<PathBuf>,
        /// `key = value` parameter file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write the per-block label map as JSON.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Write the spectral ring profile as CSV.
        #[arg(long)]
        spectrum: Option<PathBuf>,
    },
    /// Rank a dataset by each metric and write subset reports.
    Compare {
        /// Dataset manifest, CSV or JSON.
        #[arg(long)]
        manifest: PathBuf,
        /// Comma-separated metric names, or `all`.
        #[arg(long)]
        metrics: String,
        /// Number of quality subsets (default 5).
        #[arg(long)]
        subsets: Option<usize>,
        /// Output directory for the reports.
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; results do not depend on this.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Trained model, needed for Q_N.
        #[arg(long)]
        model: Option<PathBuf>,
        /// `key = value` parameter file.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train the Q_N network from a manifest and similarity scores.
    Train {
        /// Dataset manifest, CSV or JSON.
        #[arg(long)]
        manifest: PathBuf,
        /// Similarity scores CSV (`path,genuine,impostors`).
        #[arg(long)]
        scores: PathBuf,
        /// Model file to write.
        #[arg(long)]
        out: PathBuf,
        /// Weight initialization seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Full-batch training epochs.
        #[arg(long)]
        epochs: Option<usize>,
        /// Worker threads for feature extraction.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// `key = value` parameter file.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Generate a synthetic image set from a JSON spec.
    Synth {
        /// JSON set specification.
        #[arg(long)]
        spec: PathBuf,
        /// Output directory for images, manifest and scores.
        #[arg(long)]
        out: PathBuf,
    },
}

/// An error with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: EXIT_DATA,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn load_config(path: Option<&Path>) -> Result<Config, Failure> {
    match path {
        None => Ok(Config::default()),
        Some(p) => Config::load(p).map_err(|e| match e {
            Error::Io { .. } => Failure::from(e),
            other => usage(format!("{}: {other}", p.display())),
        }),
    }
}

fn parse_metrics(list: &str) -> Result<Vec<MetricId>, Failure> {
    let m = MetricId::parse_list(list).map_err(|e| usage(e.to_string()))?;
    if m.is_empty() {
        return Err(usage("no metrics requested"));
    }
    Ok(m)
}

fn load_model(path: Option<&Path>) -> Result<Option<QualityNet>, Failure> {
    path.map(QualityNet::load).transpose().map_err(Failure::from)
}

#[allow(clippy::too_many_arguments)]
fn quality(
    image: &Path,
    metrics: Option<&str>,
    block_size: Option<usize>,
    json: bool,
    model: Option<&Path>,
    config: Option<&Path>,
    labels: Option<&Path>,
    spectrum: Option<&Path>,
) -> Result<u8, Failure> {
    let mut cfg = load_config(config)?;
    if let Some(b) = block_size {
        cfg.block_size = Some(b);
    }
    let model = load_model(model)?;
    let metrics = match metrics {
        Some(list) => parse_metrics(list)?,
        None => {
            let mut m = MetricId::IMAGE.to_vec();
            if model.is_some() {
                m.push(MetricId::QN);
            }
            m
        }
    };
    let img = GrayImage::load(image)?;
    let analysis = ImageAnalysis::new(&img, &cfg)?;
    let results: Vec<_> = metrics
        .iter()
        .map(|&m| (m, analysis.metric(m, model.as_ref())))
        .collect();

    if let Some(p) = labels {
        std::fs::write(p, analysis.label_map_json()?).map_err(|e| Error::io(p, e))?;
    }
    if let Some(p) = spectrum {
        std::fs::write(p, analysis.spectrum()?.profile_csv()).map_err(|e| Error::io(p, e))?;
    }

    let failed = results.iter().filter(|(_, r)| r.is_err()).count();
    if json {
        let mut scores = serde_json::Map::new();
        let mut errors = serde_json::Map::new();
        for (m, r) in &results {
            match r {
                Ok(q) => {
                    let mut v = serde_json::json!({ "value": q.value });
                    if let Some(level) = q.level {
                        v["level"] = level.into();
                    }
                    scores.insert(m.name().into(), v);
                }
                Err(e) => {
                    errors.insert(m.name().into(), e.to_string().into());
                }
            }
        }
        let doc = serde_json::json!({
            "image": image.display().to_string(),
            "scores": scores,
            "errors": errors,
        });
        println!("{}", serde_json::to_string_pretty(&doc).expect("json value serializes"));
    } else {
        for (m, r) in &results {
            match r {
                Ok(q) => println!("{}\t{}", m.name(), q.value),
                Err(e) => eprintln!("{}: {e}", m.name()),
            }
        }
    }
    Ok(match failed {
        0 => 0,
        n if n == results.len() => EXIT_DATA,
        _ => EXIT_PARTIAL,
    })
}

#[allow(clippy::too_many_arguments)]
fn compare(
    manifest: &Path,
    metrics: &str,
    subsets: Option<usize>,
    out: &Path,
    workers: usize,
    model: Option<&Path>,
    config: Option<&Path>,
) -> Result<u8, Failure> {
    let mut cfg = load_config(config)?;
    if let Some(m) = subsets {
        cfg.subsets = m;
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    if workers == 0 {
        return Err(usage("--workers must be at least 1"));
    }
    let metrics = parse_metrics(metrics)?;
    let manifest = load_manifest(manifest)?;
    let model = load_model(model)?;
    let cmp = run_comparison(&manifest, &metrics, &cfg, model.as_ref(), workers)?;
    write_reports(out, &cmp, &cfg)?;
    for (m, r) in &cmp.reports {
        match r {
            Ok(r) if !r.excluded.is_empty() => {
                eprintln!("{}: {} images excluded after metric errors", m.name(), r.excluded.len())
            }
            Ok(_) => {}
            Err(e) => eprintln!("{}: {e}", m.name()),
        }
    }
    let failed = cmp.failed_metrics().len();
    Ok(match failed {
        0 => 0,
        n if n == metrics.len() => EXIT_DATA,
        _ => EXIT_PARTIAL,
    })
}

#[allow(clippy::too_many_arguments)]
fn train(
    manifest: &Path,
    scores: &Path,
    out: &Path,
    seed: Option<u64>,
    epochs: Option<usize>,
    workers: usize,
    config: Option<&Path>,
) -> Result<u8, Failure> {
    let mut cfg = load_config(config)?;
    if let Some(s) = seed {
        cfg.train.seed = s;
    }
    if let Some(e) = epochs {
        cfg.train.epochs = e;
    }
    if workers == 0 {
        return Err(usage("--workers must be at least 1"));
    }
    let mut manifest = load_manifest(manifest)?;
    manifest.attach_scores(load_scores(scores)?)?;
    let features = manifest_features(&manifest, &cfg, workers)?;
    let mut samples = Vec::new();
    let mut skipped = 0usize;
    for (e, f) in manifest.entries.iter().zip(features) {
        let target = e
            .scores
            .as_ref()
            .ok_or(Error::InsufficientData("no scores".into()))
            .and_then(target_separation);
        match (f, target) {
            (Ok(f), Ok(t)) => samples.push((f, t)),
            (Err(err), _) | (_, Err(err)) => {
                skipped += 1;
                eprintln!("{}: skipped: {err}", e.path);
            }
        }
    }
    let (net, mse) = train_quality_net(&samples, &cfg.train)?;
    net.save(out)?;
    println!(
        "trained on {} images ({skipped} skipped); training mse {mse}; level edges {:?}",
        samples.len(),
        net.bin_edges()
    );
    Ok(0)
}

fn synth(spec: &Path, out: &Path) -> Result<u8, Failure> {
    let text = std::fs::read_to_string(spec).map_err(|e| Error::io(spec, e))?;
    let spec: SynthSetSpec = serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", spec.display())))?;
    let manifest = write_synthetic_set(&spec, out).map_err(|e| match e {
        Error::InvalidParameter(m) => usage(m),
        other => other.into(),
    })?;
    println!("wrote {} images to {}", manifest.len(), out.display());
    Ok(0)
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Quality {
            image,
            metrics,
            block_size,
            json,
            model,
            config,
            labels,
            spectrum,
        } => quality(
            &image,
            metrics.as_deref(),
            block_size,
            json,
            model.as_deref(),
            config.as_deref(),
            labels.as_deref(),
            spectrum.as_deref(),
        ),
        Command::Compare {
            manifest,
            metrics,
            subsets,
            out,
            workers,
            model,
            config,
        } => compare(
            &manifest,
            &metrics,
            subsets,
            &out,
            workers,
            model.as_deref(),
            config.as_deref(),
        ),
        Command::Train {
            manifest,
            scores,
            out,
            seed,
            epochs,
            workers,
            config,
        } => train(&manifest, &scores, &out, seed, epochs, workers, config.as_deref()),
        Command::Synth { spec, out } => synth(&spec, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("fpq: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
