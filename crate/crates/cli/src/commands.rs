use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use concavify::io::{fmt_f64, read_dataset, write_dataset, write_trace};
use concavify::relu::{alpha_oracle, initial_weights};
use concavify::{
    compute_bounds, generate_dataset, run_descent, BoundReport, DescentConfig, DescentTrace,
    Error as CoreError, OracleStrategy, ReluDataset, ReluLoss,
};
use rayon::prelude::*;

use crate::error::{CliError, Result};
use crate::spec::{BoundKind, ExperimentSpec, OracleChoice};
use crate::table::{summary_rows, write_bound_table, write_table, BoundRow};

/// The four subcommands.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommandKind {
    Bounds,
    Train,
    ScaleSweep,
    Oracle,
}

impl CommandKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CommandKind::Bounds => "bounds",
            CommandKind::Train => "train",
            CommandKind::ScaleSweep => "scale-sweep",
            CommandKind::Oracle => "oracle",
        }
    }
}

/// Runs `kind` and returns a short human-readable summary.
pub fn execute(kind: CommandKind, spec: &ExperimentSpec) -> Result<String> {
    create_dir(&spec.out)?;
    match kind {
        CommandKind::Bounds => cmd_bounds(spec),
        CommandKind::Train => cmd_train(spec),
        CommandKind::ScaleSweep => cmd_scale_sweep(spec),
        CommandKind::Oracle => cmd_oracle(spec),
    }
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn header_lines(spec: &ExperimentSpec, kind: CommandKind) -> Vec<String> {
    let mut lines = Vec::new();
    if spec.timestamp {
        lines.push(format!(
            "generated {}",
            chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
        ));
    }
    lines.push(format!("command={} {}", kind.as_str(), spec.describe()));
    lines
}

fn run_count(spec: &ExperimentSpec) -> usize {
    if spec.data.is_some() {
        1
    } else {
        spec.reps
    }
}

fn dataset_for(spec: &ExperimentSpec, index: usize) -> Result<ReluDataset> {
    match &spec.data {
        Some((data, teacher)) => Ok(read_dataset(data, teacher)?),
        None => Ok(generate_dataset(&spec.config.with_seed(spec.run_seed(index)))?),
    }
}

fn maybe_save_data(spec: &ExperimentSpec, data: &ReluDataset, comments: &[String]) -> Result<()> {
    if !spec.save_data {
        return Ok(());
    }
    let dir = spec.out.join("data");
    create_dir(&dir)?;
    let seed = data.seed();
    write_dataset(
        &dir.join(format!("seed{seed}.csv")),
        &dir.join(format!("seed{seed}.teacher.csv")),
        data,
        comments,
    )?;
    Ok(())
}

fn oracle_strategy(spec: &ExperimentSpec, data: &ReluDataset, seed: u64) -> OracleStrategy {
    let random = OracleStrategy::RandomSearch {
        budget: spec.oracle_budget,
        seed,
    };
    match spec.oracle {
        OracleChoice::PatternEnum => OracleStrategy::PatternEnum,
        OracleChoice::RandomSearch => random,
        OracleChoice::Auto => {
            if data.d() <= concavify::relu::PATTERN_ENUM_MAX_DIM
                && data.len() <= concavify::relu::PATTERN_ENUM_MAX_POINTS
            {
                OracleStrategy::PatternEnum
            } else {
                random
            }
        }
    }
}

/// Bounds for one run, with the oracle filled in when `with_oracle` is set.
fn report_for(spec: &ExperimentSpec, data: &ReluDataset, with_oracle: bool) -> Result<(BoundReport, &'static str)> {
    let k = data.teacher().k();
    let mut report = compute_bounds(data, k, spec.alpha4_variant)?;
    let mut label = "";
    if with_oracle {
        let strategy = oracle_strategy(spec, data, data.seed());
        let value = match alpha_oracle(data, k, strategy) {
            Err(CoreError::Unsupported(_)) if spec.oracle == OracleChoice::Auto => {
                let fallback = OracleStrategy::RandomSearch {
                    budget: spec.oracle_budget,
                    seed: data.seed(),
                };
                label = "random-search";
                alpha_oracle(data, k, fallback)?
            }
            other => {
                label = match strategy {
                    OracleStrategy::PatternEnum => "pattern-enum",
                    OracleStrategy::RandomSearch { .. } => "random-search",
                };
                other?
            }
        };
        report.alpha_oracle = Some(value);
    }
    Ok((report, label))
}

fn selection(spec: &ExperimentSpec) -> [bool; 5] {
    BoundKind::ALL.map(|b| spec.selects(b))
}

fn bound_value(report: &BoundReport, b: BoundKind) -> Option<f64> {
    match b {
        BoundKind::Alpha1 => Some(report.alpha1),
        BoundKind::Alpha2 => Some(report.alpha2),
        BoundKind::Alpha3 => Some(report.alpha3),
        BoundKind::Alpha4 => report.alpha4,
        BoundKind::Oracle => report.alpha_oracle,
    }
}

fn cmd_bounds(spec: &ExperimentSpec) -> Result<String> {
    let comments = header_lines(spec, CommandKind::Bounds);
    let with_oracle = spec.selects(BoundKind::Oracle);
    let runs: Vec<(ReluDataset, BoundReport)> = (0..run_count(spec))
        .into_par_iter()
        .map(|i| {
            let data = dataset_for(spec, i)?;
            let (report, _) = report_for(spec, &data, with_oracle)?;
            Ok((data, report))
        })
        .collect::<Result<_>>()?;

    let sel = selection(spec);
    let mut rows: Vec<BoundRow> = runs.iter().map(|(_, r)| BoundRow::from_report(r, sel)).collect();
    let summary = summary_rows(&rows);
    rows.extend(summary.iter().cloned());
    for (data, _) in &runs {
        maybe_save_data(spec, data, &comments)?;
    }
    let path = spec.out.join("bounds.csv");
    write_bound_table(&path, &comments, &rows)?;

    let mut text = format!("wrote {} ({} runs)\n", path.display(), runs.len());
    for (b, (m, s)) in BoundKind::ALL
        .iter()
        .zip(summary[0].values.iter().zip(&summary[1].values))
    {
        if let (Some(m), Some(s)) = (m, s) {
            let _ = writeln!(text, "{b:>7}: mean {m:.6}  stddev {s:.6}");
        }
    }
    Ok(text)
}

const TRAIN_HEADER: [&str; 9] = [
    "bound",
    "seed",
    "beta",
    "step_size",
    "initial_loss",
    "final_loss",
    "min_descent_gap",
    "monotone",
    "diverged",
];

fn step_for(b: BoundKind, value: Option<f64>, scale: f64) -> Result<f64> {
    match value {
        Some(v) if v > 0.0 && v.is_finite() => Ok(scale / v),
        Some(v) => Err(CliError::Core(CoreError::Numerical(format!(
            "{b} = {v} does not give a usable step size"
        )))),
        None => Err(CliError::usage(format!("{b} is not available for this configuration"))),
    }
}

fn descend(spec: &ExperimentSpec, data: &ReluDataset, eta: f64) -> Result<DescentTrace> {
    let w0 = initial_weights(data, spec.init);
    let cfg = DescentConfig::new(eta, spec.steps, w0.into_vec());
    Ok(run_descent(&ReluLoss::new(data), &cfg)?)
}

fn trace_row(label: String, seed: u64, beta: f64, t: &DescentTrace) -> Vec<String> {
    vec![
        label,
        seed.to_string(),
        fmt_f64(beta),
        fmt_f64(t.step_size),
        fmt_f64(t.steps[0].loss),
        fmt_f64(t.final_loss()),
        t.min_descent_gap().map(fmt_f64).unwrap_or_default(),
        t.monotone.to_string(),
        t.diverged.to_string(),
    ]
}

fn cmd_train(spec: &ExperimentSpec) -> Result<String> {
    let comments = header_lines(spec, CommandKind::Train);
    let with_oracle = spec.selects(BoundKind::Oracle);
    type Run = (ReluDataset, Vec<(BoundKind, f64, DescentTrace)>);
    let runs: Vec<Run> = (0..run_count(spec))
        .into_par_iter()
        .map(|i| {
            let data = dataset_for(spec, i)?;
            let (report, _) = report_for(spec, &data, with_oracle)?;
            let traces = spec
                .bounds
                .iter()
                .map(|&b| {
                    let beta = bound_value(&report, b);
                    let eta = step_for(b, beta, 1.0)?;
                    Ok((b, beta.unwrap_or(f64::NAN), descend(spec, &data, eta)?))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((data, traces))
        })
        .collect::<Result<_>>()?;

    let dir = spec.out.join("train");
    create_dir(&dir)?;
    let mut rows = Vec::new();
    let mut non_monotone = 0;
    let mut slower_alpha2 = Vec::new();
    for (data, traces) in &runs {
        maybe_save_data(spec, data, &comments)?;
        let seed = data.seed();
        for (b, beta, t) in traces {
            write_trace(&dir.join(format!("{b}_seed{seed}.csv")), t, &comments)?;
            rows.push(trace_row(b.to_string(), seed, *beta, t));
            if !t.monotone {
                non_monotone += 1;
            }
        }
        let final_of = |k: BoundKind| traces.iter().find(|(b, ..)| *b == k).map(|(.., t)| t.final_loss());
        if let (Some(f2), Some(f3)) = (final_of(BoundKind::Alpha2), final_of(BoundKind::Alpha3)) {
            if f2 > f3 {
                slower_alpha2.push(seed);
            }
        }
    }
    let path = spec.out.join("train_summary.csv");
    write_table(&path, &comments, &TRAIN_HEADER, &rows)?;

    let mut text = format!(
        "wrote {} and {} traces under {}\n",
        path.display(),
        rows.len(),
        dir.display()
    );
    let _ = writeln!(text, "non-monotone traces: {non_monotone} of {}", rows.len());
    if !slower_alpha2.is_empty() {
        let _ = writeln!(
            text,
            "final loss at 1/alpha2 exceeded the one at 1/alpha3 for seeds {slower_alpha2:?}"
        );
    }
    Ok(text)
}

const SWEEP_RUN_HEADER: [&str; 7] = [
    "scale",
    "seed",
    "alpha2",
    "step_size",
    "final_loss",
    "monotone",
    "diverged",
];
const SWEEP_SUMMARY_HEADER: [&str; 4] = ["scale", "runs", "non_monotone", "fraction"];

fn cmd_scale_sweep(spec: &ExperimentSpec) -> Result<String> {
    let comments = header_lines(spec, CommandKind::ScaleSweep);
    type Run = (ReluDataset, f64, Vec<DescentTrace>);
    let runs: Vec<Run> = (0..run_count(spec))
        .into_par_iter()
        .map(|i| {
            let data = dataset_for(spec, i)?;
            let a2 = concavify::relu::bound_alpha2(&data, data.teacher().k())?;
            let traces = spec
                .scales
                .iter()
                .map(|&c| descend(spec, &data, step_for(BoundKind::Alpha2, Some(a2), c)?))
                .collect::<Result<Vec<_>>>()?;
            Ok((data, a2, traces))
        })
        .collect::<Result<_>>()?;

    let dir = spec.out.join("sweep");
    create_dir(&dir)?;
    let mut rows = Vec::new();
    let mut counts = vec![0usize; spec.scales.len()];
    for (data, a2, traces) in &runs {
        maybe_save_data(spec, data, &comments)?;
        let seed = data.seed();
        for ((c, t), count) in spec.scales.iter().zip(traces).zip(counts.iter_mut()) {
            write_trace(&dir.join(format!("c{c}_seed{seed}.csv")), t, &comments)?;
            rows.push(vec![
                fmt_f64(*c),
                seed.to_string(),
                fmt_f64(*a2),
                fmt_f64(t.step_size),
                fmt_f64(t.final_loss()),
                t.monotone.to_string(),
                t.diverged.to_string(),
            ]);
            if !t.monotone {
                *count += 1;
            }
        }
    }
    let runs_path = spec.out.join("sweep_runs.csv");
    write_table(&runs_path, &comments, &SWEEP_RUN_HEADER, &rows)?;

    let n = runs.len();
    let summary: Vec<Vec<String>> = spec
        .scales
        .iter()
        .zip(&counts)
        .map(|(c, &k)| {
            vec![
                fmt_f64(*c),
                n.to_string(),
                k.to_string(),
                fmt_f64(k as f64 / n as f64),
            ]
        })
        .collect();
    let summary_path = spec.out.join("sweep_summary.csv");
    write_table(&summary_path, &comments, &SWEEP_SUMMARY_HEADER, &summary)?;

    let mut text = format!("wrote {} and {}\n", runs_path.display(), summary_path.display());
    for (c, k) in spec.scales.iter().zip(&counts) {
        let _ = writeln!(text, "eta = {c}/alpha2: {k} of {n} runs non-monotone");
    }
    Ok(text)
}

const ORACLE_HEADER: [&str; 11] = [
    "seed",
    "d",
    "k",
    "n",
    "strategy",
    "alpha1",
    "alpha2",
    "alpha3",
    "alpha4",
    "alpha_oracle",
    "oracle_over_alpha2",
];

fn cmd_oracle(spec: &ExperimentSpec) -> Result<String> {
    let comments = header_lines(spec, CommandKind::Oracle);
    let runs: Vec<(ReluDataset, BoundReport, &'static str)> = (0..run_count(spec))
        .into_par_iter()
        .map(|i| {
            let data = dataset_for(spec, i)?;
            let (report, label) = report_for(spec, &data, true)?;
            Ok((data, report, label))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for (data, r, label) in &runs {
        maybe_save_data(spec, data, &comments)?;
        let oracle = r.alpha_oracle.unwrap_or(f64::NAN);
        let ratio = oracle / r.alpha2;
        worst = worst.max(ratio);
        rows.push(vec![
            r.config.seed.to_string(),
            r.config.d.to_string(),
            r.config.k.to_string(),
            r.config.n.to_string(),
            label.to_string(),
            fmt_f64(r.alpha1),
            fmt_f64(r.alpha2),
            fmt_f64(r.alpha3),
            r.alpha4.map(fmt_f64).unwrap_or_default(),
            fmt_f64(oracle),
            fmt_f64(ratio),
        ]);
    }
    let path: PathBuf = spec.out.join("oracle.csv");
    write_table(&path, &comments, &ORACLE_HEADER, &rows)?;
    Ok(format!(
        "wrote {} ({} runs); largest oracle/alpha2 = {worst:.12}\n",
        path.display(),
        runs.len()
    ))
}
