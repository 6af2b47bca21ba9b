//! CSV reports written by the commands.
//!
//! Each file may start with `#` lines (timestamp, settings); then one header row.
//! Missing values are empty cells.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use concavify::io::fmt_f64;
use concavify::{BoundReport, CassiniVariant};

use crate::error::{CliError, Result};

pub const BOUND_HEADER: [&str; 11] = [
    "kind",
    "d",
    "k",
    "n",
    "seed",
    "alpha1",
    "alpha2",
    "alpha3",
    "alpha4",
    "alpha_oracle",
    "alpha4_variant",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    Run,
    Mean,
    Stddev,
}

impl RowKind {
    fn as_str(self) -> &'static str {
        match self {
            RowKind::Run => "run",
            RowKind::Mean => "mean",
            RowKind::Stddev => "stddev",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "run" => Some(RowKind::Run),
            "mean" => Some(RowKind::Mean),
            "stddev" => Some(RowKind::Stddev),
            _ => None,
        }
    }
}

/// One row of `bounds.csv`; unselected bounds are `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundRow {
    pub kind: RowKind,
    pub d: usize,
    pub k: usize,
    pub n: usize,
    pub seed: Option<u64>,
    pub values: [Option<f64>; 5],
    pub alpha4_variant: CassiniVariant,
}

impl BoundRow {
    pub fn from_report(r: &BoundReport, selected: [bool; 5]) -> Self {
        let all = [Some(r.alpha1), Some(r.alpha2), Some(r.alpha3), r.alpha4, r.alpha_oracle];
        let mut values = [None; 5];
        for i in 0..5 {
            if selected[i] {
                values[i] = all[i];
            }
        }
        BoundRow {
            kind: RowKind::Run,
            d: r.config.d,
            k: r.config.k,
            n: r.config.n,
            seed: Some(r.config.seed),
            values,
            alpha4_variant: r.alpha4_variant,
        }
    }

    fn record(&self) -> Vec<String> {
        let mut rec = vec![
            self.kind.as_str().to_string(),
            self.d.to_string(),
            self.k.to_string(),
            self.n.to_string(),
            self.seed.map(|s| s.to_string()).unwrap_or_default(),
        ];
        rec.extend(self.values.iter().map(|v| v.map(fmt_f64).unwrap_or_default()));
        rec.push(self.alpha4_variant.as_str().to_string());
        rec
    }
}

/// Mean and sample standard deviation (0 for a single run) of each column.
pub fn summary_rows(runs: &[BoundRow]) -> Vec<BoundRow> {
    let Some(first) = runs.first() else {
        return Vec::new();
    };
    let mut mean = [None; 5];
    let mut sd = [None; 5];
    for c in 0..5 {
        let vals: Vec<f64> = runs.iter().filter_map(|r| r.values[c]).collect();
        if vals.is_empty() {
            continue;
        }
        let m = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = if vals.len() > 1 {
            vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (vals.len() - 1) as f64
        } else {
            0.0
        };
        mean[c] = Some(m);
        sd[c] = Some(var.sqrt());
    }
    [(RowKind::Mean, mean), (RowKind::Stddev, sd)]
        .into_iter()
        .map(|(kind, values)| BoundRow {
            kind,
            seed: None,
            values,
            ..first.clone()
        })
        .collect()
}

pub fn write_bound_table(path: &Path, comments: &[String], rows: &[BoundRow]) -> Result<()> {
    let records: Vec<Vec<String>> = rows.iter().map(BoundRow::record).collect();
    write_table(path, comments, &BOUND_HEADER, &records)
}

pub fn read_bound_table(path: &Path) -> Result<Vec<BoundRow>> {
    let (header, records) = read_table(path)?;
    if header != BOUND_HEADER {
        return Err(format_err(path, format!("unexpected header {header:?}")));
    }
    records
        .iter()
        .enumerate()
        .map(|(i, r)| parse_bound_row(r).map_err(|m| format_err(path, format!("row {}: {m}", i + 1))))
        .collect()
}

fn parse_bound_row(r: &[String]) -> std::result::Result<BoundRow, String> {
    if r.len() != BOUND_HEADER.len() {
        return Err(format!("expected {} fields, got {}", BOUND_HEADER.len(), r.len()));
    }
    let int = |s: &str| s.parse::<usize>().map_err(|_| format!("invalid integer '{s}'"));
    let opt = |s: &str| -> std::result::Result<Option<f64>, String> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|_| format!("invalid number '{s}'"))
        }
    };
    let mut values = [None; 5];
    for c in 0..5 {
        values[c] = opt(&r[5 + c])?;
    }
    Ok(BoundRow {
        kind: RowKind::parse(&r[0]).ok_or_else(|| format!("invalid row kind '{}'", r[0]))?,
        d: int(&r[1])?,
        k: int(&r[2])?,
        n: int(&r[3])?,
        seed: if r[4].is_empty() {
            None
        } else {
            Some(r[4].parse().map_err(|_| format!("invalid seed '{}'", r[4]))?)
        },
        values,
        alpha4_variant: r[10].parse().map_err(|e: concavify::Error| e.to_string())?,
    })
}

fn format_err(path: &Path, message: String) -> CliError {
    CliError::Core(concavify::Error::Format {
        path: path.to_path_buf(),
        message,
    })
}

/// Writes `# comment` lines, a header and the records.
pub fn write_table(path: &Path, comments: &[String], header: &[&str], records: &[Vec<String>]) -> Result<()> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io)?;
    let mut out = BufWriter::new(file);
    for c in comments {
        writeln!(out, "# {c}").map_err(io)?;
    }
    let csv_err = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(csv_err)?;
    for r in records {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush().map_err(io)
}

/// Returns the header and records of a table written by [`write_table`].
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::open(path).map_err(io)?;
    let mut body = String::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(io)?;
        if body.is_empty() && line.starts_with('#') {
            continue;
        }
        body.push_str(&line);
        body.push('\n');
    }
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let fmt = |e: csv::Error| format_err(path, e.to_string());
    let header = r.headers().map_err(fmt)?.iter().map(String::from).collect();
    let records = r
        .records()
        .map(|rec| rec.map(|x| x.iter().map(String::from).collect()).map_err(fmt))
        .collect::<Result<_>>()?;
    Ok((header, records))
}
