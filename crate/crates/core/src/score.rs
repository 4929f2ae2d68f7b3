use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// Identifier of a quality measure.
///
/// `QM` is the externally supplied manual label; it is ingested by the
/// harness and never computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MetricId {
    #[serde(rename = "Q_M")]
    QM,
    #[serde(rename = "S_L")]
    SL,
    #[serde(rename = "Q_S")]
    QS,
    #[serde(rename = "QI")]
    QI,
    #[serde(rename = "Q_dir")]
    QDir,
    #[serde(rename = "S_GO")]
    SGO,
    #[serde(rename = "S_GR")]
    SGR,
    #[serde(rename = "Q_F")]
    QF,
    #[serde(rename = "Q_C")]
    QC,
    #[serde(rename = "Q_N")]
    QN,
}

impl MetricId {
    pub const ALL: [MetricId; 10] = [
        MetricId::QM,
        MetricId::SL,
        MetricId::QS,
        MetricId::QI,
        MetricId::QDir,
        MetricId::SGO,
        MetricId::SGR,
        MetricId::QF,
        MetricId::QC,
        MetricId::QN,
    ];

    /// Metrics computable from pixels alone.
    pub const IMAGE: [MetricId; 8] = [
        MetricId::SL,
        MetricId::QS,
        MetricId::QI,
        MetricId::QDir,
        MetricId::SGO,
        MetricId::SGR,
        MetricId::QF,
        MetricId::QC,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricId::QM => "Q_M",
            MetricId::SL => "S_L",
            MetricId::QS => "Q_S",
            MetricId::QI => "QI",
            MetricId::QDir => "Q_dir",
            MetricId::SGO => "S_GO",
            MetricId::SGR => "S_GR",
            MetricId::QF => "Q_F",
            MetricId::QC => "Q_C",
            MetricId::QN => "Q_N",
        }
    }

    /// Parses a comma-separated metric list such as `Q_C,Q_S,Q_F`; `all`
    /// stands for every metric.
    pub fn parse_list(s: &str) -> Result<Vec<MetricId>, Error> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let ids = if part.eq_ignore_ascii_case("all") {
                MetricId::ALL.to_vec()
            } else {
                vec![part.parse()?]
            };
            for id in ids {
                if !out.contains(&id) {
                    out.push(id);
                }
            }
        }
        if out.is_empty() {
            return Err(Error::InvalidParameter("empty metric list".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| *c != '_' && *c != '-')
            .collect::<String>()
            .to_ascii_lowercase();
        let id = match key.as_str() {
            "qm" | "m" => MetricId::QM,
            "sl" => MetricId::SL,
            "qs" | "s" => MetricId::QS,
            "qi" => MetricId::QI,
            "qdir" => MetricId::QDir,
            "sgo" => MetricId::SGO,
            "sgr" => MetricId::SGR,
            "qf" | "f" => MetricId::QF,
            "qc" | "c" => MetricId::QC,
            "qn" | "n" => MetricId::QN,
            _ => return Err(Error::InvalidParameter(format!("unknown metric `{s}`"))),
        };
        Ok(id)
    }
}

/// A named quality value in `[0, 1]`; `Q_N` additionally carries its level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityScore {
    pub metric: MetricId,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<u8>,
}

impl QualityScore {
    /// Builds a score, clamping tiny excursions from rounding into `[0, 1]`.
    pub fn new(metric: MetricId, value: f64) -> Self {
        debug_assert!(value.is_finite(), "{metric} produced {value}");
        Self {
            metric,
            value: value.clamp(0.0, 1.0),
            level: None,
        }
    }

    pub fn with_level(metric: MetricId, level: u8) -> Self {
        Self {
            metric,
            value: f64::from(level) / 5.0,
            level: Some(level),
        }
    }
}
