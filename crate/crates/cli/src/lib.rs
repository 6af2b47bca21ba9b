//! Experiment driver for the `concavify` binary.
//!
//! Settings come from an optional `key = value` spec file (keys match the long
//! flag names without the dashes prefix); flags given on the command line win.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod error;
pub mod spec;
pub mod table;

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{execute, CommandKind};
pub use error::{CliError, Result};
pub use spec::{BoundKind, ExperimentSpec, OracleChoice};

#[derive(Debug, Parser)]
#[command(name = "concavify", version, about = "Concavifier bounds and step-size experiments for shallow ReLU networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Table of alpha1..alpha4 (and optionally the oracle) per seed, with mean and stddev rows.
    Bounds(RunArgs),
    /// Gradient descent with step 1/beta for each selected bound.
    Train(RunArgs),
    /// Gradient descent with step c/alpha2 for each scale factor c.
    ScaleSweep(RunArgs),
    /// Empirical optimal concavifier beside the bounds.
    Oracle(RunArgs),
}

#[derive(Debug, Default, clap::Args)]
pub struct RunArgs {
    /// Spec file with `key = value` lines.
    #[arg(long, value_name = "FILE")]
    pub spec: Option<PathBuf>,
    /// Input dimension.
    #[arg(long)]
    pub d: Option<String>,
    /// Hidden neurons.
    #[arg(long)]
    pub k: Option<String>,
    /// Training points.
    #[arg(long)]
    pub n: Option<String>,
    /// Master seed; run i uses seed + i.
    #[arg(long)]
    pub seed: Option<String>,
    /// Number of runs (seeds).
    #[arg(long)]
    pub reps: Option<String>,
    /// Gradient steps per run.
    #[arg(long)]
    pub steps: Option<String>,
    /// Comma-separated step-scale factors.
    #[arg(long)]
    pub scales: Option<String>,
    /// Comma-separated subset of alpha1,alpha2,alpha3,alpha4,oracle.
    #[arg(long)]
    pub bounds: Option<String>,
    /// Brauer-Cassini formula: standard or paper.
    #[arg(long, value_name = "VARIANT")]
    pub alpha4_variant: Option<String>,
    /// Student initialization: zero, gaussian or teacher.
    #[arg(long)]
    pub init: Option<String>,
    /// auto, pattern-enum or random-search.
    #[arg(long)]
    pub oracle_strategy: Option<String>,
    /// Weight draws for random search.
    #[arg(long)]
    pub oracle_budget: Option<String>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<String>,
    /// Use a saved dataset instead of generating one.
    #[arg(long, value_name = "FILE")]
    pub data: Option<String>,
    /// Teacher file for --data (default: <data stem>.teacher.csv).
    #[arg(long, value_name = "FILE")]
    pub teacher: Option<String>,
    /// Omit the timestamp line from output headers.
    #[arg(long)]
    pub no_timestamp: bool,
    /// Also write each run's dataset under DIR/data.
    #[arg(long)]
    pub save_data: bool,
}

impl RunArgs {
    /// Spec-file entries overlaid with the flags that were given.
    pub fn settings(&self) -> Result<BTreeMap<String, String>> {
        let mut map = match &self.spec {
            Some(p) => spec::read_spec_file(p)?,
            None => BTreeMap::new(),
        };
        let flags = [
            ("d", &self.d),
            ("k", &self.k),
            ("n", &self.n),
            ("seed", &self.seed),
            ("reps", &self.reps),
            ("steps", &self.steps),
            ("scales", &self.scales),
            ("bounds", &self.bounds),
            ("alpha4-variant", &self.alpha4_variant),
            ("init", &self.init),
            ("oracle-strategy", &self.oracle_strategy),
            ("oracle-budget", &self.oracle_budget),
            ("out", &self.out),
            ("data", &self.data),
            ("teacher", &self.teacher),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                map.insert(key.to_string(), v.clone());
            }
        }
        if self.no_timestamp {
            map.insert("no-timestamp".into(), "true".into());
        }
        if self.save_data {
            map.insert("save-data".into(), "true".into());
        }
        Ok(map)
    }

    pub fn resolve(&self) -> Result<ExperimentSpec> {
        ExperimentSpec::from_map(&self.settings()?)
    }
}

/// Runs a parsed command line and returns the text to print.
pub fn run(cli: &Cli) -> Result<String> {
    let (kind, args) = match &cli.command {
        Command::Bounds(a) => (CommandKind::Bounds, a),
        Command::Train(a) => (CommandKind::Train, a),
        Command::ScaleSweep(a) => (CommandKind::ScaleSweep, a),
        Command::Oracle(a) => (CommandKind::Oracle, a),
    };
    execute(kind, &args.resolve()?)
}
