//! `fpplab`: runs the laboratory experiments and replays their records.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fpplab::dist::DistributionSpec;
use fpplab::experiment::{
    replay_file, run, write_artifacts, ExperimentConfig, ExperimentKind, RunError, Verdict,
};
use fpplab::Error;
use serde_json::{json, Map, Value};

/// Environment variable supplying the seed when neither the flag nor the
/// config file sets one.
const SEED_VAR: &str = "FPPLAB_SEED";

#[derive(Parser)]
#[command(name = "fpplab", version, about = "First-passage percolation laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time constants of the truncations G^K of a law.
    Truncation(RunArgs),
    /// Time constants along a sequence of laws against their limit.
    MuContinuity(RunArgs),
    /// Boundary norm, density and variational Cheeger value over a p-grid.
    CheegerSweep(RunArgs),
    /// Wulff shapes of the boundary norm over a p-grid.
    WulffSweep(RunArgs),
    /// Path surgery on random instances, checked by the independent verifier.
    SurgeryValidate(RunArgs),
    /// Good-block frequencies at one or more block scales.
    BoxClassify(RunArgs),
    /// Recompute a record from its stored config and compare the results.
    Replay {
        record: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Print the default config of an experiment as JSON.
    Defaults { experiment: String },
}

#[derive(Args)]
struct RunArgs {
    /// JSON config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dimension: Option<usize>,
    #[arg(long)]
    radius: Option<i64>,
    #[arg(long)]
    margin: Option<i64>,
    /// Law literal `value:weight,...`, e.g. `1:0.8,inf:0.2`.
    #[arg(long)]
    law: Option<String>,
    /// Labeled laws `label=literal`, separated by `;`.
    #[arg(long, value_delimiter = ';')]
    laws: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    p_grid: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    n_list: Vec<i64>,
    #[arg(long, value_delimiter = ',')]
    k_list: Vec<f64>,
    /// Directions `x,y`, separated by `;`.
    #[arg(long, value_delimiter = ';')]
    directions: Vec<String>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    m0: Option<f64>,
    /// Block scales N.
    #[arg(long, value_delimiter = ',')]
    scales: Vec<i64>,
    #[arg(long)]
    p0: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    beta_quantile: Option<f64>,
    #[arg(long)]
    beta_pairs: Option<usize>,
    #[arg(long)]
    stderr_k: Option<f64>,
    #[arg(long)]
    trend_bound: Option<f64>,
    #[arg(long)]
    batches: Option<usize>,
}

fn law_json(text: &str, field: &str) -> Result<Value, RunError> {
    let law: DistributionSpec = text.parse().map_err(|e| RunError::new(field, e))?;
    serde_json::to_value(law).map_err(|e| RunError::new(field, Error::Json(e)))
}

impl RunArgs {
    fn patch(&self) -> Result<Map<String, Value>, RunError> {
        let mut m = Map::new();
        let mut set = |k: &str, v: Value| {
            m.insert(k.to_string(), v);
        };
        macro_rules! scalar {
            ($($f:ident),*) => {$(
                if let Some(v) = self.$f {
                    set(stringify!($f), json!(v));
                }
            )*};
        }
        scalar!(seed, dimension, radius, margin, replicas, m0, p0, p, q, beta, rho, beta_quantile, beta_pairs, stderr_k, trend_bound, batches);
        macro_rules! list {
            ($($f:ident),*) => {$(
                if !self.$f.is_empty() {
                    set(stringify!($f), json!(self.$f));
                }
            )*};
        }
        list!(p_grid, n_list, k_list, scales);
        if let Some(l) = &self.law {
            set("law", law_json(l, "law")?);
        }
        if !self.laws.is_empty() {
            let laws = self
                .laws
                .iter()
                .map(|entry| {
                    let (label, lit) = entry
                        .split_once('=')
                        .ok_or_else(|| RunError::invalid("laws", format!("{entry:?} is not label=literal")))?;
                    Ok(json!({ "label": label.trim(), "law": law_json(lit, "laws")? }))
                })
                .collect::<Result<Vec<_>, RunError>>()?;
            set("laws", Value::Array(laws));
        }
        if !self.directions.is_empty() {
            let dirs = self
                .directions
                .iter()
                .map(|d| {
                    d.split(',')
                        .map(|x| x.trim().parse::<i64>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|_| RunError::invalid("directions", format!("{d:?} is not a list of integers")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            set("directions", json!(dirs));
        }
        Ok(m)
    }

    fn config(&self, kind: ExperimentKind) -> Result<ExperimentConfig, RunError> {
        let mut patch = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| RunError::new("config", Error::Io(e)))?;
                match serde_json::from_str(&text).map_err(|e| RunError::new("config", Error::Json(e)))? {
                    Value::Object(m) => m,
                    _ => return Err(RunError::invalid("config", "config file must hold a JSON object")),
                }
            }
            None => Map::new(),
        };
        if let Some(k) = patch.get("experiment") {
            if k != &json!(kind) {
                return Err(RunError::invalid("experiment", format!("config is for {k}, not {}", kind.name())));
            }
        }
        if !patch.contains_key("seed") {
            if let Ok(v) = std::env::var(SEED_VAR) {
                let seed: u64 = v
                    .parse()
                    .map_err(|_| RunError::invalid("seed", format!("{SEED_VAR}={v:?} is not an unsigned integer")))?;
                patch.insert("seed".into(), json!(seed));
            }
        }
        patch.extend(self.patch()?);
        patch.insert("experiment".into(), json!(kind));
        ExperimentConfig::defaults(kind).merged(Value::Object(patch))
    }
}

fn execute(kind: ExperimentKind, args: &RunArgs) -> Result<(), RunError> {
    let config = args.config(kind)?;
    let (record, artifacts) = run(&config, args.workers)?;
    let files = write_artifacts(&args.out, &record, &artifacts)?;
    for w in &record.warnings {
        eprintln!("warning: {w}");
    }
    for line in &record.log {
        println!("{line}");
    }
    println!(
        "{} done in {} ms (config {}); wrote {} files to {}",
        kind.name(),
        record.wall_clock_ms,
        &record.config_hash[..12],
        files.len(),
        args.out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let kind = match &cli.command {
        Command::Truncation(_) => ExperimentKind::Truncation,
        Command::MuContinuity(_) => ExperimentKind::MuContinuity,
        Command::CheegerSweep(_) => ExperimentKind::CheegerSweep,
        Command::WulffSweep(_) => ExperimentKind::WulffSweep,
        Command::SurgeryValidate(_) => ExperimentKind::SurgeryValidate,
        Command::BoxClassify(_) => ExperimentKind::BoxClassify,
        Command::Replay { record, workers } => {
            return match replay_file(record, *workers) {
                Ok(v) => {
                    println!("{v}");
                    if v == Verdict::Match {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => fail(&e),
            };
        }
        Command::Defaults { experiment } => {
            let Some(kind) = ExperimentKind::ALL.into_iter().find(|k| k.name() == experiment) else {
                eprintln!("error: unknown experiment {experiment:?}");
                return ExitCode::from(2);
            };
            let text = serde_json::to_string_pretty(&ExperimentConfig::defaults(kind)).expect("config serializes");
            println!("{text}");
            return ExitCode::SUCCESS;
        }
    };
    let (Command::Truncation(args)
    | Command::MuContinuity(args)
    | Command::CheegerSweep(args)
    | Command::WulffSweep(args)
    | Command::SurgeryValidate(args)
    | Command::BoxClassify(args)) = &cli.command
    else {
        unreachable!("handled above")
    };
    match execute(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

fn fail(e: &RunError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}
