//! Dataset manifests (CSV or JSON) and similarity-score files.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::ScoreSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Path as written in the manifest; also the image's identity in reports.
    pub path: String,
    pub subject: String,
    pub finger: String,
    /// Manual quality label 0..=9.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qm: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<ScoreSet>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    /// Directory relative paths are resolved against.
    pub base_dir: PathBuf,
}

#[derive(Deserialize)]
struct CsvRow {
    path: String,
    subject: String,
    finger: String,
    #[serde(default)]
    qm: Option<String>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum JsonManifest {
    List(Vec<JsonEntry>),
    Object { entries: Vec<JsonEntry> },
}

#[derive(Deserialize)]
struct JsonEntry {
    path: String,
    subject: serde_json::Value,
    finger: serde_json::Value,
    #[serde(default)]
    qm: Option<i64>,
    #[serde(default)]
    scores: Option<ScoreSet>,
}

fn id_text(v: serde_json::Value) -> Result<String> {
    match v {
        serde_json::Value::String(s) => Ok(s),
        serde_json::Value::Number(n) => Ok(n.to_string()),
        other => Err(Error::Manifest(format!(
            "subject/finger must be a string or number, got {other}"
        ))),
    }
}

fn check_qm(path: &str, qm: i64) -> Result<u8> {
    if (0..=9).contains(&qm) {
        Ok(qm as u8)
    } else {
        Err(Error::Manifest(format!("{path}: manual quality {qm} outside 0..9")))
    }
}

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let m = DatasetManifest {
            entries,
            base_dir: base_dir.into(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        let p = Path::new(&entry.path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            if e.path.is_empty() {
                return Err(Error::Manifest("empty image path".into()));
            }
            if !seen.insert(e.path.as_str()) {
                return Err(Error::Manifest(format!("duplicate path {}", e.path)));
            }
            if let Some(q) = e.qm {
                check_qm(&e.path, i64::from(q))?;
            }
        }
        Ok(())
    }

    pub fn parse_csv(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut entries = Vec::new();
        for row in rdr.deserialize::<CsvRow>() {
            let row = row?;
            let qm = match row.qm.as_deref() {
                None | Some("") => None,
                Some(s) => {
                    let v: i64 = s.parse().map_err(|_| {
                        Error::Manifest(format!("{}: manual quality {s:?} is not an integer", row.path))
                    })?;
                    Some(check_qm(&row.path, v)?)
                }
            };
            entries.push(ManifestEntry {
                path: row.path,
                subject: row.subject,
                finger: row.finger,
                qm,
                scores: None,
            });
        }
        Self::new(entries, base_dir)
    }

    pub fn parse_json(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let raw: JsonManifest = serde_json::from_str(text)?;
        let list = match raw {
            JsonManifest::List(l) | JsonManifest::Object { entries: l } => l,
        };
        let entries = list
            .into_iter()
            .map(|e| {
                let qm = e.qm.map(|q| check_qm(&e.path, q)).transpose()?;
                Ok(ManifestEntry {
                    subject: id_text(e.subject)?,
                    finger: id_text(e.finger)?,
                    path: e.path,
                    qm,
                    scores: e.scores,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries, base_dir)
    }

    /// Loads a `.json` manifest or, for any other extension, a CSV one with
    /// header `path,subject,finger,qm` (`qm` optional).
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        if path.extension().is_some_and(|x| x.eq_ignore_ascii_case("json")) {
            Self::parse_json(&text, base)
        } else {
            Self::parse_csv(&text, base)
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["path", "subject", "finger", "qm"])?;
        for e in &self.entries {
            let qm = e.qm.map(|q| q.to_string()).unwrap_or_default();
            w.write_record([e.path.as_str(), &e.subject, &e.finger, &qm])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Manifest(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Attaches score sets by manifest path. Unknown paths are an error.
    pub fn attach_scores(&mut self, mut scores: HashMap<String, ScoreSet>) -> Result<()> {
        let known: HashSet<&str> = self.entries.iter().map(|e| e.path.as_str()).collect();
        if let Some(p) = scores.keys().find(|p| !known.contains(p.as_str())) {
            return Err(Error::Manifest(format!("scores given for unknown image {p}")));
        }
        for e in &mut self.entries {
            if let Some(s) = scores.remove(&e.path) {
                e.scores = Some(s);
            }
        }
        Ok(())
    }
}

/// Convenience for [`DatasetManifest::load`].
pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    DatasetManifest::load(path)
}

#[derive(Deserialize)]
struct ScoreRow {
    path: String,
    genuine: f64,
    impostors: String,
}

/// Parses a scores CSV: header `path,genuine,impostors`, impostor scores
/// separated by `;`.
pub fn parse_scores(text: &str) -> Result<HashMap<String, ScoreSet>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = HashMap::new();
    for row in rdr.deserialize::<ScoreRow>() {
        let row = row?;
        let impostors = row
            .impostors
            .split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::Manifest(format!("{}: bad impostor score {s:?}", row.path)))
            })
            .collect::<Result<Vec<_>>>()?;
        if !row.genuine.is_finite() || impostors.iter().any(|s| !s.is_finite()) {
            return Err(Error::Manifest(format!("{}: non-finite score", row.path)));
        }
        if out
            .insert(
                row.path.clone(),
                ScoreSet {
                    genuine: row.genuine,
                    impostors,
                },
            )
            .is_some()
        {
            return Err(Error::Manifest(format!("duplicate scores for {}", row.path)));
        }
    }
    Ok(out)
}

pub fn load_scores(path: impl AsRef<Path>) -> Result<HashMap<String, ScoreSet>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scores(&text)
}

/// Writes score sets in the format read by [`parse_scores`], in the given order.
pub fn scores_to_csv<'a>(rows: impl IntoIterator<Item = (&'a str, &'a ScoreSet)>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["path", "genuine", "impostors"])?;
    for (path, s) in rows {
        let imp: Vec<String> = s.impostors.iter().map(f64::to_string).collect();
        w.write_record([path, &s.genuine.to_string(), &imp.join(";")])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Manifest(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_manifest() {
        let m = DatasetManifest::parse_csv("path,subject,finger,qm\na.pgm,1,2,9\nb.png,1,3,\n", "/data").unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.entries[0].qm, Some(9));
        assert_eq!(m.entries[1].qm, None);
        assert_eq!(m.resolve(&m.entries[0]), PathBuf::from("/data/a.pgm"));
    }

    #[test]
    fn csv_without_qm_column() {
        let m = DatasetManifest::parse_csv("path,subject,finger\na.pgm,s,f\n", ".").unwrap();
        assert_eq!(m.entries[0].qm, None);
    }

    #[test]
    fn manifest_errors() {
        assert!(matches!(
            DatasetManifest::parse_csv("path,subject,finger,qm\na.pgm,1,1,12\n", "."),
            Err(Error::Manifest(_))
        ));
        assert!(matches!(
            DatasetManifest::parse_csv("path,subject,finger,qm\na.pgm,1,1,\na.pgm,2,1,\n", "."),
            Err(Error::Manifest(_))
        ));
        assert!(DatasetManifest::parse_csv("path,subject,finger,qm\na.pgm,1,1,x\n", ".").is_err());
        assert!(matches!(load_manifest("/nonexistent/m.csv"), Err(Error::Io { .. })));
    }

    #[test]
    fn json_manifest() {
        let text = r#"{"entries": [
            {"path": "a.pgm", "subject": 3, "finger": "L1", "qm": 4,
             "scores": {"genuine": 0.9, "impostors": [0.1, 0.2]}},
            {"path": "b.pgm", "subject": "3", "finger": "L2"}
        ]}"#;
        let m = DatasetManifest::parse_json(text, ".").unwrap();
        assert_eq!(m.entries[0].subject, "3");
        assert_eq!(m.entries[0].qm, Some(4));
        assert_eq!(m.entries[0].scores.as_ref().unwrap().impostors.len(), 2);
        assert_eq!(m.entries[1].qm, None);
        assert!(DatasetManifest::parse_json(r#"[{"path":"a","subject":1,"finger":1,"qm":-1}]"#, ".").is_err());
    }

    #[test]
    fn csv_round_trip() {
        let m = DatasetManifest::parse_csv("path,subject,finger,qm\na.pgm,1,2,9\nb.png,1,3,\n", ".").unwrap();
        let back = DatasetManifest::parse_csv(&m.to_csv().unwrap(), ".").unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn scores_file() {
        let s = parse_scores("path,genuine,impostors\na.pgm,0.9,0.1;0.2;0.3\n").unwrap();
        assert_eq!(s["a.pgm"].impostors, vec![0.1, 0.2, 0.3]);
        let text = scores_to_csv([("a.pgm", &s["a.pgm"])]).unwrap();
        assert_eq!(parse_scores(&text).unwrap(), s);
        assert!(parse_scores("path,genuine,impostors\na,1,x\n").is_err());

        let mut m = DatasetManifest::parse_csv("path,subject,finger\na.pgm,1,1\n", ".").unwrap();
        m.attach_scores(s).unwrap();
        assert!(m.entries[0].scores.is_some());
        let extra = parse_scores("path,genuine,impostors\nzzz,1,0;1\n").unwrap();
        assert!(m.attach_scores(extra).is_err());
    }
}
