//! Experiment runner: validated configurations, replica orchestration on a
//! fixed-size worker pool, persisted records and bit-exact replay.

mod config;
mod pipelines;
mod record;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub use config::{ExperimentConfig, ExperimentKind, LabeledLaw, DEFAULT_SEED, SURGERY_RHO};
pub use record::{compare, Metric, Metrics, ReplicaRecord, RunRecord, Table, Verdict};

use crate::error::Error;

/// An error tagged with the configuration field to adjust.
#[derive(Debug, thiserror::Error)]
#[error("{error} (adjust `{field}`)")]
pub struct RunError {
    pub field: String,
    #[source]
    pub error: Error,
}

impl RunError {
    pub fn new(field: &str, error: Error) -> RunError {
        RunError { field: field.to_string(), error }
    }

    pub fn invalid(field: &str, msg: impl Into<String>) -> RunError {
        RunError::new(field, Error::InvalidInput(msg.into()))
    }

    /// Window failures point at the window radius whatever the call site.
    pub fn at(field: &'static str) -> impl Fn(Error) -> RunError {
        move |e| {
            let f = if e.is_window_failure() { "radius" } else { field };
            RunError::new(f, e)
        }
    }

    /// 2 for invalid parameters and failed preconditions, 3 for samples
    /// without the needed giant or window, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self.error {
            Error::NoGiant(_) | Error::WindowTooSmall(_) => 3,
            Error::InvalidInput(_)
            | Error::InvalidDistribution(_)
            | Error::PreconditionFailed(_)
            | Error::TooLarge { .. }
            | Error::Degenerate(_)
            | Error::Json(_) => 2,
            Error::RoutingFailed(_) | Error::Io(_) => 1,
        }
    }
}

/// Files produced alongside a record.
#[derive(Clone, Debug, Default)]
pub struct Artifacts {
    pub tables: Vec<Table>,
    pub documents: Vec<(String, serde_json::Value)>,
}

pub(crate) struct Outcome {
    pub per_replica: Vec<ReplicaRecord>,
    pub aggregates: Metrics,
    pub log: Vec<String>,
    pub artifacts: Artifacts,
}

/// Validates and runs `config` on a pool of `workers` threads.
pub fn run(config: &ExperimentConfig, workers: usize) -> Result<(RunRecord, Artifacts), RunError> {
    execute(config, workers, true)
}

/// Like [`run`] but skips work that only feeds artifact files; the record
/// is identical.
pub fn run_record(config: &ExperimentConfig, workers: usize) -> Result<RunRecord, RunError> {
    execute(config, workers, false).map(|(r, _)| r)
}

fn execute(config: &ExperimentConfig, workers: usize, files: bool) -> Result<(RunRecord, Artifacts), RunError> {
    if workers == 0 {
        return Err(RunError::invalid("workers", "must be positive"));
    }
    let warnings = config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| RunError::invalid("workers", e.to_string()))?;
    let start = Instant::now();
    let outcome = pool.install(|| pipelines::dispatch(config, files))?;
    let record = RunRecord {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        config_hash: config.hash(),
        per_replica: outcome.per_replica,
        aggregates: outcome.aggregates,
        log: outcome.log,
        warnings,
        workers,
        wall_clock_ms: start.elapsed().as_millis() as u64,
    };
    Ok((record, outcome.artifacts))
}

/// Writes `record.json`, one CSV per table and one JSON per document.
pub fn write_artifacts(dir: &Path, record: &RunRecord, artifacts: &Artifacts) -> Result<Vec<PathBuf>, RunError> {
    let io = |e: std::io::Error| RunError::new("out", Error::Io(e));
    fs::create_dir_all(dir).map_err(io)?;
    let mut written = Vec::new();
    let mut put = |name: String, body: String| -> Result<(), RunError> {
        let path = dir.join(name);
        fs::write(&path, body).map_err(io)?;
        written.push(path);
        Ok(())
    };
    put("record.json".into(), pretty(record)?)?;
    for t in &artifacts.tables {
        put(format!("{}.csv", t.name), t.to_csv(record.config.seed, &record.config_hash))?;
    }
    for (name, doc) in &artifacts.documents {
        put(format!("{name}.json"), pretty(doc)?)?;
    }
    Ok(written)
}

fn pretty<T: serde::Serialize>(v: &T) -> Result<String, RunError> {
    serde_json::to_string_pretty(v).map_err(|e| RunError::new("out", Error::Json(e)))
}

pub fn run_to_dir(config: &ExperimentConfig, workers: usize, dir: &Path) -> Result<RunRecord, RunError> {
    let (record, artifacts) = run(config, workers)?;
    write_artifacts(dir, &record, &artifacts)?;
    Ok(record)
}

/// Recomputes a record from its stored config.
pub fn replay(record: &RunRecord, workers: usize) -> Result<Verdict, RunError> {
    let fresh = run_record(&record.config, workers)?;
    Ok(compare(record, &fresh))
}

pub fn replay_file(path: &Path, workers: usize) -> Result<Verdict, RunError> {
    replay(&RunRecord::load(path)?, workers)
}
