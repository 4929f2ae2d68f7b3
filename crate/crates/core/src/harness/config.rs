//! Run configuration with a flat `key = value` text form.

use std::collections::BTreeMap;
use std::path::Path;

use crate::blocks::SegmentParams;
use crate::classifier::TrainConfig;
use crate::error::{Error, Result};
use crate::global::{SpectrumRoi, CONTINUITY_CAP, UNIFORMITY_SCALE};
use crate::local::{DirectionalParams, GaborParams, HongThresholds, LimThresholds};

/// Every tunable threshold of the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    /// `None` derives the block size from the image resolution.
    pub block_size: Option<usize>,
    pub segment: SegmentParams,
    /// `None` uses a quarter of the foreground bounding-box diagonal.
    pub weight_sigma: Option<f64>,
    pub hong: HongThresholds,
    pub lim: LimThresholds,
    pub gabor: GaborParams,
    pub directional: DirectionalParams,
    pub spectrum: SpectrumRoi,
    pub continuity_cap: f64,
    pub uniformity_scale: f64,
    /// Weights of `S_L`, `S_GO`, `S_GR` in `Q_C`.
    pub combine_weights: [f64; 3],
    pub subsets: usize,
    pub train: TrainConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            block_size: None,
            segment: SegmentParams::default(),
            weight_sigma: None,
            hong: HongThresholds::default(),
            lim: LimThresholds::default(),
            gabor: GaborParams::default(),
            directional: DirectionalParams::default(),
            spectrum: SpectrumRoi::default(),
            continuity_cap: CONTINUITY_CAP,
            uniformity_scale: UNIFORMITY_SCALE,
            combine_weights: [1.0 / 3.0; 3],
            subsets: 5,
            train: TrainConfig::default(),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("{key}: cannot parse {value:?}")))
}

fn nonzero<T: PartialEq + Default>(x: T) -> Option<T> {
    (x != T::default()).then_some(x)
}

// key, field path, kind; `opt` fields treat 0 as "automatic"
macro_rules! config_keys {
    ($( $key:literal => ($($field:tt)+) $kind:ident ),* $(,)?) => {
        impl Config {
            /// All recognised keys in file order.
            pub const KEYS: &'static [&'static str] = &[$($key),*];

            /// Sets one value from its text form.
            pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
                let value = value.trim();
                match key {
                    $($key => config_keys!(@set self.$($field)+, $kind, key, value),)*
                    _ => return Err(Error::InvalidParameter(format!("unknown config key {key:?}"))),
                }
                Ok(())
            }

            /// Current values keyed by name, in text form.
            pub fn entries(&self) -> BTreeMap<&'static str, String> {
                let mut m = BTreeMap::new();
                $(m.insert($key, config_keys!(@get self.$($field)+, $kind));)*
                m
            }
        }
    };
    (@set $f:expr, num, $k:ident, $v:ident) => { $f = parse($k, $v)? };
    (@set $f:expr, opt, $k:ident, $v:ident) => { $f = nonzero(parse($k, $v)?) };
    (@get $f:expr, num) => { $f.to_string() };
    (@get $f:expr, opt) => { $f.map_or_else(|| "0".to_string(), |v| v.to_string()) };
}

config_keys! {
    "block_size" => (block_size) opt,
    "segment.min_std" => (segment.min_std) num,
    "segment.max_mean" => (segment.max_mean) num,
    "weight_sigma" => (weight_sigma) opt,
    "hong.min_amplitude" => (hong.min_amplitude) num,
    "hong.min_frequency" => (hong.min_frequency) num,
    "hong.max_frequency" => (hong.max_frequency) num,
    "hong.max_variance_ratio" => (hong.max_variance_ratio) num,
    "hong.reject_fraction" => (hong.reject_fraction) num,
    "lim.min_coherence" => (lim.min_coherence) num,
    "lim.min_frequency" => (lim.min_frequency) num,
    "lim.max_frequency" => (lim.max_frequency) num,
    "lim.min_ridge_thickness" => (lim.min_ridge_thickness) num,
    "lim.max_ridge_thickness" => (lim.max_ridge_thickness) num,
    "lim.min_rv_ratio" => (lim.min_rv_ratio) num,
    "lim.max_rv_ratio" => (lim.max_rv_ratio) num,
    "gabor.orientations" => (gabor.orientations) num,
    "gabor.wavelength" => (gabor.wavelength) num,
    "gabor.sigma" => (gabor.sigma) num,
    "gabor.threshold" => (gabor.threshold) num,
    "gabor.reject_below" => (gabor.reject_below) num,
    "directional.directions" => (directional.directions) num,
    "directional.probe_length" => (directional.probe_length) num,
    "directional.prominence" => (directional.prominence) num,
    "spectrum.f_min" => (spectrum.f_min) num,
    "spectrum.f_max" => (spectrum.f_max) num,
    "spectrum.bands" => (spectrum.bands) num,
    "continuity.cap" => (continuity_cap) num,
    "uniformity.scale" => (uniformity_scale) num,
    "combine.w_l" => (combine_weights[0]) num,
    "combine.w_go" => (combine_weights[1]) num,
    "combine.w_gr" => (combine_weights[2]) num,
    "subsets" => (subsets) num,
    "train.epochs" => (train.epochs) num,
    "train.learning_rate" => (train.learning_rate) num,
    "train.seed" => (train.seed) num,
    "train.init_range" => (train.init_range) num,
}

impl Config {
    /// Parses `key = value` lines on top of the defaults. Blank lines and
    /// lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        cfg.apply(text)?;
        Ok(cfg)
    }

    pub fn apply(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidParameter(format!("config line {}: expected key = value", n + 1)))?;
            self.set(k.trim(), v)?;
        }
        self.validate()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// The config in its file form, one sorted `key = value` per line.
    pub fn to_text(&self) -> String {
        self.entries().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.spectrum.validate()?;
        if self.subsets < 2 {
            return Err(Error::InvalidParameter("need at least 2 subsets".into()));
        }
        validate_weights(&self.combine_weights)?;
        if let Some(s) = self.weight_sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidParameter(format!("weight_sigma {s}")));
            }
        }
        Ok(())
    }
}

/// Non-negative weights summing to 1 within 1e-9.
pub fn validate_weights(w: &[f64; 3]) -> Result<()> {
    if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "combination weights must be non-negative and sum to 1, got {w:?}"
        )));
    }
    Ok(())
}
