use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{ExperimentConfig, RunError};
use crate::error::Error;

/// An `f64` whose JSON form survives non-finite values.
#[derive(Clone, Copy, Debug, Default)]
pub struct Metric(pub f64);

impl PartialEq for Metric {
    fn eq(&self, other: &Metric) -> bool {
        self.0.to_bits() == other.0.to_bits()
    }
}

impl Serialize for Metric {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let v = self.0;
        if v.is_finite() {
            s.serialize_f64(v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

impl<'de> Deserialize<'de> for Metric {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Metric, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(Metric(v)),
            Repr::Text(t) => match t.as_str() {
                "nan" => Ok(Metric(f64::NAN)),
                "inf" => Ok(Metric(f64::INFINITY)),
                "-inf" => Ok(Metric(f64::NEG_INFINITY)),
                _ => Err(serde::de::Error::custom(format!("bad metric {t:?}"))),
            },
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        crate::dist::fmt_value(self.0).fmt(f)
    }
}

pub type Metrics = BTreeMap<String, Metric>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicaRecord {
    pub replica: u64,
    /// Sub-experiment the replica belongs to, e.g. a scale or a grid point.
    pub group: String,
    pub values: Metrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub version: String,
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub per_replica: Vec<ReplicaRecord>,
    pub aggregates: Metrics,
    pub log: Vec<String>,
    pub warnings: Vec<String>,
    pub workers: usize,
    pub wall_clock_ms: u64,
}

impl RunRecord {
    pub fn load(path: &Path) -> Result<RunRecord, RunError> {
        let text = fs::read_to_string(path).map_err(|e| RunError::new("record", Error::Io(e)))?;
        serde_json::from_str(&text).map_err(|e| RunError::new("record", Error::Json(e)))
    }

    pub fn aggregate(&self, key: &str) -> Option<f64> {
        self.aggregates.get(key).map(|m| m.0)
    }
}

/// A CSV table. Rows with `replica = None` are aggregates.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<(Option<u64>, Vec<String>)>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Table {
        Table { name: name.to_string(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, replica: Option<u64>, values: Vec<String>) {
        debug_assert_eq!(values.len(), self.columns.len());
        self.rows.push((replica, values));
    }

    /// Prefixes every row with the seed, the replica (or `agg`) and the
    /// config hash.
    pub fn to_csv(&self, seed: u64, hash: &str) -> String {
        let mut out = String::from("seed,replica,config_hash");
        for c in &self.columns {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (replica, values) in &self.rows {
            let r = replica.map_or_else(|| "agg".to_string(), |r| r.to_string());
            out.push_str(&format!("{seed},{r},{hash}"));
            for v in values {
                out.push(',');
                out.push_str(v);
            }
            out.push('\n');
        }
        out
    }
}

/// Outcome of recomputing a record.
#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    Match,
    Mismatch { field: String, stored: String, recomputed: String },
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Match => write!(f, "MATCH"),
            Verdict::Mismatch { field, stored, recomputed } => {
                write!(f, "MISMATCH at {field}: stored {stored}, recomputed {recomputed}")
            }
        }
    }
}

fn compare_metrics(prefix: &str, stored: &Metrics, fresh: &Metrics) -> Option<Verdict> {
    for (k, v) in stored {
        match fresh.get(k) {
            Some(w) if w == v => {}
            Some(w) => {
                return Some(Verdict::Mismatch {
                    field: format!("{prefix}{k}"),
                    stored: v.to_string(),
                    recomputed: w.to_string(),
                })
            }
            None => {
                return Some(Verdict::Mismatch {
                    field: format!("{prefix}{k}"),
                    stored: v.to_string(),
                    recomputed: "absent".into(),
                })
            }
        }
    }
    fresh.keys().find(|k| !stored.contains_key(*k)).map(|k| Verdict::Mismatch {
        field: format!("{prefix}{k}"),
        stored: "absent".into(),
        recomputed: fresh[k].to_string(),
    })
}

/// Compares the reproducible parts of two records, aggregates first.
pub fn compare(stored: &RunRecord, fresh: &RunRecord) -> Verdict {
    if let Some(v) = compare_metrics("aggregates.", &stored.aggregates, &fresh.aggregates) {
        return v;
    }
    if stored.per_replica.len() != fresh.per_replica.len() {
        return Verdict::Mismatch {
            field: "per_replica.len".into(),
            stored: stored.per_replica.len().to_string(),
            recomputed: fresh.per_replica.len().to_string(),
        };
    }
    for (i, (a, b)) in stored.per_replica.iter().zip(&fresh.per_replica).enumerate() {
        if a.replica != b.replica || a.group != b.group {
            return Verdict::Mismatch {
                field: format!("per_replica[{i}].id"),
                stored: format!("{}/{}", a.group, a.replica),
                recomputed: format!("{}/{}", b.group, b.replica),
            };
        }
        if let Some(v) = compare_metrics(&format!("per_replica[{i}]."), &a.values, &b.values) {
            return v;
        }
    }
    Verdict::Match
}
