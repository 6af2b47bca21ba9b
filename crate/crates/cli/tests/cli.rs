use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use concavify::io::{read_trace, write_dataset};
use concavify::relu::{bound_alpha2, initial_weights};
use concavify::{
    compute_bounds, generate_dataset, run_descent, CassiniVariant, DescentConfig, NetConfig,
    ReluDataset, ReluLoss, StudentInit, Weights,
};
use concavify_cli::table::{read_bound_table, read_table, RowKind};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_concavify"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(files_under(&p));
        } else {
            out.push(p);
        }
    }
    out.sort();
    out
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let (header, rows) = read_table(path).unwrap();
    let c = header.iter().position(|h| h == name).unwrap();
    rows.into_iter().map(|r| r[c].clone()).collect()
}

#[test]
fn bound_table_matches_library_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["bounds", "--d", "4", "--k", "3", "--n", "50", "--seed", "10", "--reps", "3", "--out", s(dir.path())]);
    let rows = read_bound_table(&dir.path().join("bounds.csv")).unwrap();
    assert_eq!(rows.len(), 5);
    for (i, row) in rows[..3].iter().enumerate() {
        // per-run seed = master + run index
        let data = generate_dataset(&NetConfig::new(4, 3, 50, 10 + i as u64).unwrap()).unwrap();
        let r = compute_bounds(&data, 3, CassiniVariant::Standard).unwrap();
        assert_eq!(row.kind, RowKind::Run);
        assert_eq!(row.seed, Some(10 + i as u64));
        assert_eq!(row.values, [Some(r.alpha1), Some(r.alpha2), Some(r.alpha3), r.alpha4, None]);
    }
    assert_eq!(rows[3].kind, RowKind::Mean);
    assert_eq!(rows[4].kind, RowKind::Stddev);
    let mean2 = rows[..3].iter().map(|r| r.values[1].unwrap()).sum::<f64>() / 3.0;
    assert_eq!(rows[3].values[1], Some(mean2));
}

#[test]
fn trace_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&[
        "train", "--d", "3", "--k", "2", "--n", "40", "--seed", "5", "--reps", "2", "--steps", "30",
        "--bounds", "alpha2,alpha3", "--out", s(dir.path()),
    ]);
    let data = generate_dataset(&NetConfig::new(3, 2, 40, 6).unwrap()).unwrap();
    let a2 = bound_alpha2(&data, 2).unwrap();
    let w0 = initial_weights(&data, StudentInit::Zero).into_vec();
    let expected = run_descent(&ReluLoss::new(&data), &DescentConfig::new(1.0 / a2, 30, w0)).unwrap();
    let back = read_trace(&dir.path().join("train/alpha2_seed6.csv")).unwrap();
    assert_eq!(back, expected);
    assert_eq!(files_under(&dir.path().join("train")).len(), 4);
}

#[test]
fn reruns_are_byte_identical_without_timestamp() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for cmd in ["bounds", "train", "scale-sweep", "oracle"] {
        for dir in [&a, &b] {
            run_ok(&[
                cmd, "--d", "2", "--k", "2", "--n", "8", "--reps", "3", "--steps", "20",
                "--save-data", "--no-timestamp", "--out", s(dir.path()),
            ]);
        }
    }
    let fa = files_under(a.path());
    let fb = files_under(b.path());
    assert_eq!(fa.len(), fb.len());
    assert!(fa.len() > 10);
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(x.strip_prefix(a.path()), y.strip_prefix(b.path()));
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{}", x.display());
        assert!(!fs::read_to_string(x).unwrap().contains("generated"));
    }
}

#[test]
fn timestamp_line_is_written_by_default() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["bounds", "--d", "2", "--k", "1", "--n", "5", "--reps", "1", "--out", s(dir.path())]);
    let text = fs::read_to_string(dir.path().join("bounds.csv")).unwrap();
    assert!(text.starts_with("# generated "));
    // the table still parses
    assert_eq!(read_bound_table(&dir.path().join("bounds.csv")).unwrap().len(), 3);
}

#[test]
fn spec_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("run.spec");
    let out = dir.path().join("out");
    fs::write(&spec, format!("# small grid\nd = 3\nk = 2\nn = 20\nreps = 4\nout = {}\n", out.display())).unwrap();
    run_ok(&["bounds", "--spec", s(&spec), "--reps", "2", "--no-timestamp"]);
    let rows = read_bound_table(&out.join("bounds.csv")).unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!((rows[0].d, rows[0].k, rows[0].n), (3, 2, 20));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = s(dir.path());
    assert_eq!(run(&["bounds", "--d", "0", "--out", o]).status.code(), Some(1));
    assert_eq!(run(&["scale-sweep", "--scales", "1,-1", "--out", o]).status.code(), Some(1));
    assert_eq!(run(&["bounds", "--alpha4-variant", "fancy", "--out", o]).status.code(), Some(1));
    assert_eq!(run(&["nonsense"]).status.code(), Some(1));
    assert_eq!(run(&["bounds", "--spec", "/definitely/missing.spec"]).status.code(), Some(3));
    assert_eq!(
        run(&["oracle", "--d", "5", "--n", "20", "--oracle-strategy", "pattern-enum", "--out", o]).status.code(),
        Some(1)
    );
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    assert_eq!(run(&["bounds", "--out", s(&blocker.join("sub"))]).status.code(), Some(3));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn table_one_defaults_land_in_range() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["bounds", "--reps", "20", "--no-timestamp", "--out", s(dir.path())]);
    let rows = read_bound_table(&dir.path().join("bounds.csv")).unwrap();
    let mean = rows.iter().find(|r| r.kind == RowKind::Mean).unwrap();
    let (a1, a2) = (mean.values[0].unwrap(), mean.values[1].unwrap());
    assert!((44.0..=55.0).contains(&a1), "{a1}");
    assert!((4.7..=7.0).contains(&a2), "{a2}");
}

#[test]
fn single_point_bounds_coincide() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&[
        "bounds", "--d", "3", "--k", "1", "--n", "1", "--reps", "5", "--bounds", "alpha1,alpha2,oracle",
        "--no-timestamp", "--out", s(dir.path()),
    ]);
    for row in read_bound_table(&dir.path().join("bounds.csv")).unwrap() {
        if row.kind != RowKind::Run {
            continue;
        }
        let data = generate_dataset(&NetConfig::new(3, 1, 1, row.seed.unwrap()).unwrap()).unwrap();
        let sq: f64 = data.point(0).iter().map(|v| v * v).sum();
        for v in [row.values[0], row.values[1], row.values[4]] {
            let v = v.unwrap();
            assert!((v - sq).abs() <= 1e-12 * sq, "{v} vs {sq}");
        }
    }
}

#[test]
fn oracle_ratios() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&[
        "oracle", "--d", "2", "--k", "2", "--n", "8", "--reps", "10", "--oracle-strategy", "pattern-enum",
        "--no-timestamp", "--out", s(dir.path()),
    ]);
    let ratios = column(&dir.path().join("oracle.csv"), "oracle_over_alpha2");
    assert_eq!(ratios.len(), 10);
    for r in ratios {
        assert!(r.parse::<f64>().unwrap() <= 1.0 + 1e-9);
    }

    let single = tempfile::tempdir().unwrap();
    run_ok(&["oracle", "--d", "4", "--k", "3", "--n", "1", "--reps", "4", "--out", s(single.path())]);
    for r in column(&single.path().join("oracle.csv"), "oracle_over_alpha2") {
        assert!((r.parse::<f64>().unwrap() - 1.0).abs() < 1e-12, "{r}");
    }
}

#[test]
fn oracle_on_saved_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let teacher = Weights::new(1, 1, vec![1.0]).unwrap();
    let data = ReluDataset::from_inputs(&[vec![1.0], vec![-2.0]], teacher, 0).unwrap();
    let (dp, tp) = (dir.path().join("fx.csv"), dir.path().join("fx.teacher.csv"));
    write_dataset(&dp, &tp, &data, &[]).unwrap();
    let out = dir.path().join("out");
    run_ok(&["oracle", "--data", s(&dp), "--out", s(&out)]);
    let v = column(&out.join("oracle.csv"), "alpha_oracle");
    assert_eq!(v.len(), 1);
    assert!((v[0].parse::<f64>().unwrap() - 2.5).abs() < 1e-12, "{}", v[0]);
}

#[test]
fn train_examples() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["train", "--reps", "3", "--bounds", "alpha2,alpha3", "--no-timestamp", "--out", s(dir.path())]);
    let summary = dir.path().join("train_summary.csv");
    assert!(column(&summary, "monotone").iter().all(|m| m == "true"));

    let t = tempfile::tempdir().unwrap();
    run_ok(&["train", "--reps", "2", "--steps", "10", "--init", "teacher", "--out", s(t.path())]);
    for l in column(&t.path().join("train_summary.csv"), "final_loss") {
        assert_eq!(l.parse::<f64>().unwrap(), 0.0);
    }
    let trace = read_trace(&t.path().join("train/alpha1_seed0.csv")).unwrap();
    assert!(trace.losses().all(|l| l == 0.0));
}

#[test]
fn scale_sweep_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_ok(&["scale-sweep", "--no-timestamp", "--out", s(dir.path())]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("4/alpha2"));
    let summary = dir.path().join("sweep_summary.csv");
    let scales = column(&summary, "scale");
    let counts = column(&summary, "non_monotone");
    assert_eq!(scales, ["0.5", "1.0", "2.0", "4.0"]);
    assert_eq!(counts[0], "0");
    assert_eq!(counts[1], "0");
    assert!(counts[3].parse::<usize>().unwrap() >= 1);
    assert_eq!(column(&dir.path().join("sweep_runs.csv"), "seed").len(), 40);
}
