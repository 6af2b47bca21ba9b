//! Experiment settings, merged from an optional `key = value` file and flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use concavify::{CassiniVariant, NetConfig, StudentInit};

use crate::error::{CliError, Result};

/// One of the quantities a run can report or train against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BoundKind {
    Alpha1,
    Alpha2,
    Alpha3,
    Alpha4,
    Oracle,
}

impl BoundKind {
    pub const ALL: [BoundKind; 5] = [
        BoundKind::Alpha1,
        BoundKind::Alpha2,
        BoundKind::Alpha3,
        BoundKind::Alpha4,
        BoundKind::Oracle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BoundKind::Alpha1 => "alpha1",
            BoundKind::Alpha2 => "alpha2",
            BoundKind::Alpha3 => "alpha3",
            BoundKind::Alpha4 => "alpha4",
            BoundKind::Oracle => "oracle",
        }
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "alpha1" | "a1" | "1" => Ok(BoundKind::Alpha1),
            "alpha2" | "a2" | "2" => Ok(BoundKind::Alpha2),
            "alpha3" | "a3" | "3" => Ok(BoundKind::Alpha3),
            "alpha4" | "a4" | "4" => Ok(BoundKind::Alpha4),
            "oracle" | "alpha_oracle" => Ok(BoundKind::Oracle),
            other => Err(CliError::usage(format!(
                "unknown bound '{other}' (expected alpha1, alpha2, alpha3, alpha4 or oracle)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleChoice {
    /// Pattern enumeration when the instance is small enough, random search otherwise.
    Auto,
    PatternEnum,
    RandomSearch,
}

impl FromStr for OracleChoice {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "auto" => Ok(OracleChoice::Auto),
            "pattern-enum" | "pattern" | "enum" => Ok(OracleChoice::PatternEnum),
            "random-search" | "random" => Ok(OracleChoice::RandomSearch),
            other => Err(CliError::usage(format!(
                "unknown oracle strategy '{other}' (expected auto, pattern-enum or random-search)"
            ))),
        }
    }
}

impl fmt::Display for OracleChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OracleChoice::Auto => "auto",
            OracleChoice::PatternEnum => "pattern-enum",
            OracleChoice::RandomSearch => "random-search",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    /// `seed` here is the master seed; run `i` uses `seed + i`.
    pub config: NetConfig,
    pub scales: Vec<f64>,
    pub bounds: Vec<BoundKind>,
    pub reps: usize,
    pub steps: usize,
    pub alpha4_variant: CassiniVariant,
    pub init: StudentInit,
    pub oracle: OracleChoice,
    pub oracle_budget: usize,
    pub out: PathBuf,
    pub timestamp: bool,
    pub save_data: bool,
    /// Use a saved dataset (and its teacher file) instead of generating one per run.
    pub data: Option<(PathBuf, PathBuf)>,
}

pub const KEYS: [&str; 17] = [
    "d",
    "k",
    "n",
    "seed",
    "reps",
    "steps",
    "scales",
    "bounds",
    "alpha4-variant",
    "init",
    "oracle-strategy",
    "oracle-budget",
    "out",
    "no-timestamp",
    "save-data",
    "data",
    "teacher",
];

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            config: NetConfig {
                d: 10,
                k: 5,
                n: 1000,
                seed: 0,
            },
            scales: vec![0.5, 1.0, 2.0, 4.0],
            bounds: vec![
                BoundKind::Alpha1,
                BoundKind::Alpha2,
                BoundKind::Alpha3,
                BoundKind::Alpha4,
            ],
            reps: 10,
            steps: 100,
            alpha4_variant: CassiniVariant::Standard,
            init: StudentInit::Zero,
            oracle: OracleChoice::Auto,
            oracle_budget: 10_000,
            out: PathBuf::from("out"),
            timestamp: true,
            save_data: false,
            data: None,
        }
    }
}

/// Reads `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_spec_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::usage(format!("spec line {}: expected key = value, got '{raw}'", no + 1))
        })?;
        let key = normalize_key(k);
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::usage(format!("spec line {}: unknown key '{}'", no + 1, k.trim())));
        }
        map.insert(key, v.trim().to_string());
    }
    Ok(map)
}

pub fn read_spec_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_spec_text(&text)
}

fn normalize_key(k: &str) -> String {
    k.trim().to_ascii_lowercase().replace('_', "-")
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| CliError::usage(format!("{key}: invalid value '{v}'")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(CliError::usage(format!("{key}: expected true or false, got '{v}'"))),
    }
}

impl ExperimentSpec {
    /// Applies `values` on top of the defaults and validates the result.
    pub fn from_map(values: &BTreeMap<String, String>) -> Result<Self> {
        let mut s = ExperimentSpec::default();
        let mut data_path = None;
        let mut teacher_path = None;
        for (key, v) in values {
            match key.as_str() {
                "d" => s.config.d = parse_num(key, v)?,
                "k" => s.config.k = parse_num(key, v)?,
                "n" => s.config.n = parse_num(key, v)?,
                "seed" => s.config.seed = parse_num(key, v)?,
                "reps" => s.reps = parse_num(key, v)?,
                "steps" => s.steps = parse_num(key, v)?,
                "scales" => {
                    s.scales = v
                        .split(',')
                        .filter(|t| !t.trim().is_empty())
                        .map(|t| parse_num(key, t))
                        .collect::<Result<_>>()?
                }
                "bounds" => {
                    let mut b: Vec<BoundKind> = v
                        .split(',')
                        .filter(|t| !t.trim().is_empty())
                        .map(str::parse)
                        .collect::<Result<_>>()?;
                    b.sort();
                    b.dedup();
                    s.bounds = b;
                }
                "alpha4-variant" => {
                    s.alpha4_variant = v.parse().map_err(|e: concavify::Error| CliError::usage(e.to_string()))?
                }
                "init" => s.init = v.parse()?,
                "oracle-strategy" => s.oracle = v.parse()?,
                "oracle-budget" => s.oracle_budget = parse_num(key, v)?,
                "out" => s.out = PathBuf::from(v),
                "no-timestamp" => s.timestamp = !parse_bool(key, v)?,
                "save-data" => s.save_data = parse_bool(key, v)?,
                "data" => data_path = Some(PathBuf::from(v)),
                "teacher" => teacher_path = Some(PathBuf::from(v)),
                other => return Err(CliError::usage(format!("unknown setting '{other}'"))),
            }
        }
        s.data = match (data_path, teacher_path) {
            (Some(d), Some(t)) => Some((d, t)),
            (Some(d), None) => {
                let t = d.with_file_name(format!(
                    "{}.teacher.csv",
                    d.file_stem().and_then(|x| x.to_str()).unwrap_or("data")
                ));
                Some((d, t))
            }
            (None, Some(_)) => return Err(CliError::usage("teacher given without data")),
            (None, None) => None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.reps == 0 {
            return Err(CliError::usage("reps must be at least 1"));
        }
        if self.steps == 0 {
            return Err(CliError::usage("steps must be at least 1"));
        }
        if self.scales.is_empty() {
            return Err(CliError::usage("at least one scale factor is required"));
        }
        if let Some(c) = self.scales.iter().find(|c| !(**c > 0.0) || !c.is_finite()) {
            return Err(CliError::usage(format!("scale factors must be positive, got {c}")));
        }
        if self.bounds.is_empty() {
            return Err(CliError::usage("select at least one bound"));
        }
        if self.oracle_budget == 0 {
            return Err(CliError::usage("oracle budget must be at least 1"));
        }
        Ok(())
    }

    /// Seed of run `index`: the master seed plus the index.
    pub fn run_seed(&self, index: usize) -> u64 {
        self.config.seed.wrapping_add(index as u64)
    }

    pub fn selects(&self, b: BoundKind) -> bool {
        self.bounds.contains(&b)
    }

    /// Flat `key=value` rendering written into output headers.
    pub fn describe(&self) -> String {
        let scales: Vec<String> = self.scales.iter().map(|c| c.to_string()).collect();
        let bounds: Vec<&str> = self.bounds.iter().map(|b| b.as_str()).collect();
        format!(
            "d={} k={} n={} seed={} reps={} steps={} scales={} bounds={} alpha4-variant={} init={} oracle-strategy={} oracle-budget={}",
            self.config.d,
            self.config.k,
            self.config.n,
            self.config.seed,
            self.reps,
            self.steps,
            scales.join(","),
            bounds.join(","),
            self.alpha4_variant,
            self.init,
            self.oracle,
            self.oracle_budget
        )
    }
}
