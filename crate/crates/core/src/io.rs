//! Delimited-text formats for datasets, teacher weights and descent traces.
//!
//! Every file is plain CSV with a single header row. Lines starting with `#`
//! before the header carry `key=value` metadata (and anything else a caller
//! wants to record, such as a timestamp); readers ignore unknown keys.
//! Floats are written in Rust's shortest round-trip form, so reading a file
//! back reproduces the in-memory values bit for bit.
//!
//! | file       | header                                              |
//! |------------|-----------------------------------------------------|
//! | dataset    | `x1,…,xd,y` (metadata: `d k n seed`)                |
//! | teacher    | `w`, one row per coordinate of the flat `kd` vector |
//! | trace      | `step,loss,grad_norm,descent_gap,monotone_so_far`   |

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::descent::{DescentTrace, TraceStep};
use crate::error::{Error, Result};
use crate::relu::{ReluDataset, Weights};

pub const TRACE_HEADER: [&str; 5] = ["step", "loss", "grad_norm", "descent_gap", "monotone_so_far"];

/// Leading `#` lines of a file, split into `key=value` pairs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Metadata {
    pub values: BTreeMap<String, String>,
}

impl Metadata {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, src: &str) -> Result<T> {
        let raw = self.get(key).ok_or_else(|| Error::Format {
            path: src.into(),
            message: format!("missing metadata key '{key}'"),
        })?;
        raw.parse().map_err(|_| Error::Format {
            path: src.into(),
            message: format!("metadata '{key}' has invalid value '{raw}'"),
        })
    }
}

/// Formats a float so that `str::parse::<f64>` gives back the same bits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn parse_f64(s: &str, src: &str, line: usize) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Format {
        path: src.into(),
        message: format!("line {line}: '{s}' is not a number"),
    })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(src: &str) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Format {
        path: src.into(),
        message: e.to_string(),
    }
}

/// Writes `# ...` comment lines followed by the CSV body.
fn write_comments<W: Write>(w: &mut W, comments: &[String]) -> std::io::Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    Ok(())
}

/// Splits leading `#` lines off `input`; returns metadata and the remaining text.
fn split_metadata<R: Read>(input: R) -> std::io::Result<(Metadata, String)> {
    let mut meta = Metadata::default();
    let mut body = String::new();
    let mut in_header = true;
    for line in BufReader::new(input).lines() {
        let line = line?;
        if in_header {
            if let Some(rest) = line.strip_prefix('#') {
                for tok in rest.split_whitespace() {
                    if let Some((k, v)) = tok.split_once('=') {
                        meta.values.insert(k.to_string(), v.to_string());
                    }
                }
                continue;
            }
            in_header = false;
        }
        body.push_str(&line);
        body.push('\n');
    }
    Ok((meta, body))
}

pub fn dataset_metadata(data: &ReluDataset) -> String {
    let c = data.config();
    format!("d={} k={} n={} seed={}", c.d, c.k, c.n, c.seed)
}

/// Writes the dataset body (`x1..xd,y`) with its metadata line.
pub fn write_dataset_to<W: Write>(out: W, data: &ReluDataset, comments: &[String]) -> Result<()> {
    let src = "<dataset>";
    let mut out = BufWriter::new(out);
    let mut all = comments.to_vec();
    all.push(dataset_metadata(data));
    write_comments(&mut out, &all).map_err(|e| Error::Format {
        path: src.into(),
        message: e.to_string(),
    })?;
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=data.d()).map(|i| format!("x{i}")).collect();
    header.push("y".into());
    w.write_record(&header).map_err(csv_err(src))?;
    for (x, y) in data.points().zip(data.targets()) {
        let row: Vec<String> = x.iter().chain(std::iter::once(y)).map(|&v| fmt_f64(v)).collect();
        w.write_record(&row).map_err(csv_err(src))?;
    }
    w.flush().map_err(|e| Error::Format {
        path: src.into(),
        message: e.to_string(),
    })
}

pub fn write_weights_to<W: Write>(out: W, w: &Weights, comments: &[String]) -> Result<()> {
    let src = "<weights>";
    let mut out = BufWriter::new(out);
    let mut all = comments.to_vec();
    all.push(format!("k={} d={}", w.k(), w.d()));
    write_comments(&mut out, &all).map_err(|e| Error::Format {
        path: src.into(),
        message: e.to_string(),
    })?;
    let mut cw = csv::Writer::from_writer(out);
    cw.write_record(["w"]).map_err(csv_err(src))?;
    for &v in w.as_slice() {
        cw.write_record([fmt_f64(v)]).map_err(csv_err(src))?;
    }
    cw.flush().map_err(|e| Error::Format {
        path: src.into(),
        message: e.to_string(),
    })
}

pub fn read_weights_from<R: Read>(input: R, src: &str) -> Result<Weights> {
    let (meta, body) = split_metadata(input).map_err(|e| Error::Format {
        path: src.into(),
        message: e.to_string(),
    })?;
    let k: usize = meta.parse("k", src)?;
    let d: usize = meta.parse("d", src)?;
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r.headers().map_err(csv_err(src))?.clone();
    if header.len() != 1 || &header[0] != "w" {
        return Err(Error::Format {
            path: src.into(),
            message: format!("expected header 'w', got {header:?}"),
        });
    }
    let mut flat = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(src))?;
        flat.push(parse_f64(&rec[0], src, i + 2)?);
    }
    Weights::new(k, d, flat)
}

/// Reads a dataset body and pairs it with `teacher`; targets are re-verified.
pub fn read_dataset_from<R: Read>(input: R, teacher: Weights, src: &str) -> Result<ReluDataset> {
    let (meta, body) = split_metadata(input).map_err(|e| Error::Format {
        path: src.into(),
        message: e.to_string(),
    })?;
    let d: usize = meta.parse("d", src)?;
    let seed: u64 = meta.parse("seed", src)?;
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r.headers().map_err(csv_err(src))?.clone();
    if header.len() != d + 1 || &header[d] != "y" {
        return Err(Error::Format {
            path: src.into(),
            message: format!("expected {} columns ending in 'y', got {header:?}", d + 1),
        });
    }
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(src))?;
        for c in 0..d {
            inputs.push(parse_f64(&rec[c], src, i + 2)?);
        }
        targets.push(parse_f64(&rec[d], src, i + 2)?);
    }
    if let Ok(n) = meta.parse::<usize>("n", src) {
        if n != targets.len() {
            return Err(Error::Format {
                path: src.into(),
                message: format!("metadata says n={n} but the file has {} rows", targets.len()),
            });
        }
    }
    ReluDataset::from_parts(d, inputs, targets, teacher, seed)
}

/// Writes `dataset_path` and `teacher_path`.
pub fn write_dataset(
    dataset_path: &Path,
    teacher_path: &Path,
    data: &ReluDataset,
    comments: &[String],
) -> Result<()> {
    let f = File::create(dataset_path).map_err(io_err(dataset_path))?;
    write_dataset_to(f, data, comments).map_err(|e| with_path(e, dataset_path))?;
    let f = File::create(teacher_path).map_err(io_err(teacher_path))?;
    write_weights_to(f, data.teacher(), comments).map_err(|e| with_path(e, teacher_path))
}

pub fn read_dataset(dataset_path: &Path, teacher_path: &Path) -> Result<ReluDataset> {
    let f = File::open(teacher_path).map_err(io_err(teacher_path))?;
    let teacher = read_weights_from(f, &teacher_path.display().to_string())?;
    let f = File::open(dataset_path).map_err(io_err(dataset_path))?;
    read_dataset_from(f, teacher, &dataset_path.display().to_string())
}

pub fn trace_metadata(trace: &DescentTrace) -> Vec<String> {
    let point: Vec<String> = trace.final_point.iter().map(|&v| fmt_f64(v)).collect();
    vec![
        format!(
            "step_size={} tolerance={} monotone={} diverged={}",
            fmt_f64(trace.step_size),
            fmt_f64(trace.tolerance),
            trace.monotone,
            trace.diverged
        ),
        format!("final_point={}", point.join(";")),
    ]
}

pub fn write_trace_to<W: Write>(out: W, trace: &DescentTrace, comments: &[String]) -> Result<()> {
    let src = "<trace>";
    let fmt_err = |e: std::io::Error| Error::Format {
        path: src.into(),
        message: e.to_string(),
    };
    let mut out = BufWriter::new(out);
    let mut all = comments.to_vec();
    all.extend(trace_metadata(trace));
    write_comments(&mut out, &all).map_err(fmt_err)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER).map_err(csv_err(src))?;
    for s in &trace.steps {
        w.write_record([
            s.step.to_string(),
            fmt_f64(s.loss),
            fmt_f64(s.grad_norm),
            s.descent_gap.map(fmt_f64).unwrap_or_default(),
            s.monotone_so_far.to_string(),
        ])
        .map_err(csv_err(src))?;
    }
    w.flush().map_err(fmt_err)
}

pub fn read_trace_from<R: Read>(input: R, src: &str) -> Result<DescentTrace> {
    let (meta, body) = split_metadata(input).map_err(|e| Error::Format {
        path: src.into(),
        message: e.to_string(),
    })?;
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r.headers().map_err(csv_err(src))?.clone();
    if header.iter().ne(TRACE_HEADER) {
        return Err(Error::Format {
            path: src.into(),
            message: format!("expected header {TRACE_HEADER:?}, got {header:?}"),
        });
    }
    let bad = |line: usize, what: &str| Error::Format {
        path: src.into(),
        message: format!("line {line}: invalid {what}"),
    };
    let mut steps = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(src))?;
        let line = i + 2;
        let gap = match rec[3].trim() {
            "" => None,
            s => Some(parse_f64(s, src, line)?),
        };
        steps.push(TraceStep {
            step: rec[0].trim().parse().map_err(|_| bad(line, "step"))?,
            loss: parse_f64(&rec[1], src, line)?,
            grad_norm: parse_f64(&rec[2], src, line)?,
            descent_gap: gap,
            monotone_so_far: rec[4].trim().parse().map_err(|_| bad(line, "flag"))?,
        });
    }
    let final_point = match meta.get("final_point") {
        None | Some("") => Vec::new(),
        Some(s) => s
            .split(';')
            .map(|v| parse_f64(v, src, 0))
            .collect::<Result<_>>()?,
    };
    Ok(DescentTrace {
        step_size: meta.parse("step_size", src)?,
        tolerance: meta.parse("tolerance", src)?,
        steps,
        monotone: meta.parse("monotone", src)?,
        diverged: meta.parse("diverged", src)?,
        final_point,
    })
}

pub fn write_trace(path: &Path, trace: &DescentTrace, comments: &[String]) -> Result<()> {
    let f = File::create(path).map_err(io_err(path))?;
    write_trace_to(f, trace, comments).map_err(|e| with_path(e, path))
}

pub fn read_trace(path: &Path) -> Result<DescentTrace> {
    let f = File::open(path).map_err(io_err(path))?;
    read_trace_from(f, &path.display().to_string())
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Format { message, .. } => Error::Format {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    }
}
