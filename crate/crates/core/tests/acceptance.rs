//! End-to-end acceptance checks. Each test prints one `criterion N: PASS|FAIL`
//! line (written straight to stderr so it shows without `--nocapture`).

use std::io::Write;
use std::time::Instant;

use approx::relative_eq;
use concavify::eigen::kron_allones_structure_lambda;
use concavify::objective::gradient_relative_error;
use concavify::relu::{
    alpha_oracle, alpha_single_point, allactive_gram, bound_alpha1, bound_alpha2, bound_alpha3,
    bound_alpha4, initial_weights, is_kink_free, second_moment,
};
use concavify::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn report(n: u32, ok: bool, started: Instant, detail: &str) {
    let line = format!(
        "criterion {n}: {} ({:.1}s) {detail}",
        if ok { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64()
    );
    let _ = writeln!(std::io::stderr(), "{line}");
    assert!(ok, "{line}");
}

fn le_rel(a: f64, b: f64, rel: f64) -> bool {
    a <= b + rel * b.abs()
}

fn gaussian_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

#[test]
fn criterion_1_bound_chain() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut failures = Vec::new();
    let configs = 100;
    for c in 0..configs {
        let cfg = NetConfig::new(
            rng.random_range(1..=10),
            rng.random_range(1..=5),
            rng.random_range(1..=200),
            1000 + c,
        )
        .unwrap();
        let data = generate_dataset(&cfg).unwrap();
        let r = compute_bounds(&data, cfg.k, CassiniVariant::Standard).unwrap();
        let oracle = alpha_oracle(
            &data,
            cfg.k,
            OracleStrategy::RandomSearch { budget: 10_000, seed: c },
        )
        .unwrap();
        let mut check = |ok: bool, what: &str| {
            if !ok {
                failures.push(format!("{cfg:?}: {what}"));
            }
        };
        check(le_rel(oracle, r.alpha2, 1e-9), "oracle > alpha2");
        check(le_rel(r.alpha2, r.alpha1, 1e-9), "alpha2 > alpha1");
        check(le_rel(r.alpha2, r.alpha3, 1e-9), "alpha2 > alpha3");
        if let Some(a4) = r.alpha4 {
            check(le_rel(r.alpha2, a4, 1e-9), "alpha2 > alpha4");
            check(le_rel(a4, r.alpha3, 1e-9), "alpha4 > alpha3");
        }
    }
    report(
        1,
        failures.is_empty(),
        t0,
        &format!("{configs} configurations, {} violations {:?}", failures.len(), failures.iter().take(3).collect::<Vec<_>>()),
    );
}

#[test]
fn criterion_2_table_reproduction() {
    let t0 = Instant::now();
    // reference (d, k, N, α₁, α₂, α₃, α₄)
    let table: [(usize, usize, usize, f64, f64, f64, f64); 6] = [
        (10, 5, 1000, 48.8230, 5.8450, 76.2652, 6.9137),
        (10, 5, 10000, 50.1020, 5.2639, 78.4085, 5.4655),
        (5, 5, 1000, 24.4085, 5.2798, 33.5060, 5.5278),
        (50, 5, 1000, 249.4196, 7.0231, 503.4564, 12.7285),
        (10, 2, 1000, 10.0366, 2.2672, 13.7343, 2.4322),
        (10, 50, 1000, 250.6084, 53.09, 341.6694, 54.92),
    ];
    let tolerances = [0.15, 0.25, 0.25, 0.40];
    let names = ["alpha1", "alpha2", "alpha3", "alpha4"];
    let seeds = 20u64;
    let mut misses = Vec::new();
    let mut lines = Vec::new();
    for &(d, k, n, p1, p2, p3, p4) in &table {
        let mut sums = [0.0; 4];
        for seed in 0..seeds {
            let data = generate_dataset(&NetConfig::new(d, k, n, seed).unwrap()).unwrap();
            let r = compute_bounds(&data, k, CassiniVariant::Standard).unwrap();
            for (s, v) in sums.iter_mut().zip([r.alpha1, r.alpha2, r.alpha3, r.alpha4.unwrap()]) {
                *s += v;
            }
        }
        let printed = [p1, p2, p3, p4];
        let mut row = format!("d={d} k={k} N={n}:");
        for b in 0..4 {
            let mean = sums[b] / seeds as f64;
            let rel = (mean - printed[b]) / printed[b];
            row.push_str(&format!(" {}={mean:.4} ({:+.1}%)", names[b], 100.0 * rel));
            if rel.abs() > tolerances[b] {
                misses.push(format!("d={d} k={k} N={n} {}", names[b]));
            }
        }
        lines.push(row);
    }
    for l in &lines {
        let _ = writeln!(std::io::stderr(), "  {l}");
    }
    report(
        2,
        misses.is_empty(),
        t0,
        &format!("{} of 24 cells outside tolerance: {misses:?}", misses.len()),
    );
}

#[test]
fn criterion_3_single_point_exactness() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut failures = Vec::new();
    for c in 0..50u64 {
        let (d, k) = (rng.random_range(1..=10), rng.random_range(1..=5));
        let data = generate_dataset(&NetConfig::new(d, k, 1, 3000 + c).unwrap()).unwrap();
        let x = data.point(0);
        let exact = k as f64 * x.iter().map(|v| v * v).sum::<f64>();
        let single = alpha_single_point(x, k).unwrap();
        let a2 = bound_alpha2(&data, k).unwrap();
        let strategy = if d <= 3 {
            OracleStrategy::PatternEnum
        } else {
            OracleStrategy::RandomSearch { budget: 10_000, seed: c }
        };
        let oracle = alpha_oracle(&data, k, strategy).unwrap();
        for (name, v) in [("single", single), ("alpha2", a2), ("oracle", oracle)] {
            if !relative_eq!(v, exact, max_relative = 1e-9) {
                failures.push(format!("d={d} k={k}: {name}={v} vs k|x|^2={exact}"));
            }
        }
    }
    report(3, failures.is_empty(), t0, &format!("50 instances, failures {failures:?}"));
}

fn descent_runs(scale: f64, seeds: u64) -> Vec<DescentTrace> {
    (0..seeds)
        .map(|seed| {
            let data = generate_dataset(&NetConfig::new(10, 5, 1000, seed).unwrap()).unwrap();
            let a2 = bound_alpha2(&data, 5).unwrap();
            let w0 = initial_weights(&data, StudentInit::Zero);
            let cfg = DescentConfig::new(scale / a2, 100, w0.into_vec());
            run_descent(&ReluLoss::new(&data), &cfg).unwrap()
        })
        .collect()
}

#[test]
fn criterion_4_descent_guarantee() {
    let t0 = Instant::now();
    let traces = descent_runs(1.0, 10);
    let mut bad = Vec::new();
    for (seed, t) in traces.iter().enumerate() {
        let violations = t.descent_violations();
        if !t.monotone || !violations.is_empty() || t.diverged {
            bad.push(format!("seed {seed}: monotone={} violations={violations:?}", t.monotone));
        }
    }
    let worst = traces
        .iter()
        .flat_map(|t| t.steps.iter())
        .filter_map(|s| s.descent_gap.map(|g| g / s.loss.abs().max(1.0)))
        .fold(f64::INFINITY, f64::min);
    report(
        4,
        bad.is_empty(),
        t0,
        &format!("10 seeds, smallest relative gap {worst:.3e}, failures {bad:?}"),
    );
}

#[test]
fn criterion_5_step_scale_falsification() {
    let t0 = Instant::now();
    let count = |scale: f64| descent_runs(scale, 10).iter().filter(|t| !t.monotone).count();
    let (half, one, four) = (count(0.5), count(1.0), count(4.0));
    report(
        5,
        four >= 1 && half == 0 && one == 0,
        t0,
        &format!("non-monotone seeds of 10: 0.5/a2 -> {half}, 1/a2 -> {one}, 4/a2 -> {four}"),
    );
}

#[test]
fn criterion_6_eigen_identities() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut failures = Vec::new();
    let mut worst_residual = 0.0f64;
    for c in 0..50u64 {
        let (d, k) = (rng.random_range(1..=10), rng.random_range(1..=5));
        let n = rng.random_range(1..=200);
        let data = generate_dataset(&NetConfig::new(d, k, n, 6000 + c).unwrap()).unwrap();
        let fast = kron_allones_structure_lambda(&second_moment(&data), k).unwrap();
        let m = allactive_gram(&data, k).unwrap();
        let full = power_iteration(&m).unwrap();
        if (fast - full.value).abs() > 1e-8 * full.value.abs().max(1.0) {
            failures.push(format!("d={d} k={k} N={n}: {fast} vs {}", full.value));
        }
        for (label, mat) in [("S", second_moment(&data)), ("M", m)] {
            let r = power_iteration(&mat).unwrap();
            let res = r.residual(&mat) / r.value.abs().max(1.0);
            worst_residual = worst_residual.max(res);
            if res > 1e-8 || !r.converged {
                failures.push(format!("d={d} k={k} N={n}: residual on {label} = {res:e}"));
            }
        }
    }
    report(
        6,
        failures.is_empty(),
        t0,
        &format!("50 datasets, worst scaled residual {worst_residual:.2e}, failures {failures:?}"),
    );
}

#[test]
fn criterion_7_gradient_matches_finite_differences() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut worst = 0.0f64;
    let mut checked = 0;
    let mut seed = 7000u64;
    while checked < 1000 {
        let (d, k) = (rng.random_range(1..=10), rng.random_range(1..=5));
        let data = generate_dataset(&NetConfig::new(d, k, 30, seed).unwrap()).unwrap();
        seed += 1;
        let f = ReluLoss::new(&data);
        for _ in 0..50 {
            let w = Weights::new(k, d, gaussian_vec(&mut rng, k * d)).unwrap();
            if !is_kink_free(&w, &data, 1e-3) {
                continue;
            }
            worst = worst.max(gradient_relative_error(&f, w.as_slice()).unwrap());
            checked += 1;
        }
    }
    report(7, worst < 1e-5, t0, &format!("{checked} kink-free points, worst relative error {worst:.2e}"));
}

#[test]
fn criterion_8_upper_quadratic_certification() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut failures = 0usize;
    let mut worst = f64::INFINITY;
    for c in 0..5u64 {
        let (d, k) = (rng.random_range(2..=10), rng.random_range(1..=5));
        let data = generate_dataset(&NetConfig::new(d, k, 200, 8000 + c).unwrap()).unwrap();
        let a2 = bound_alpha2(&data, k).unwrap();
        let f = ReluLoss::new(&data);
        for _ in 0..10_000 {
            let sx: f64 = rng.random_range(0.1..3.0);
            let sy: f64 = rng.random_range(0.1..3.0);
            let x: Vec<f64> = gaussian_vec(&mut rng, k * d).iter().map(|v| v * sx).collect();
            let y: Vec<f64> = gaussian_vec(&mut rng, k * d).iter().map(|v| v * sy).collect();
            let chk = upper_quadratic_check(&f, &x, &y, a2).unwrap();
            worst = worst.min(chk.slack);
            if !chk.holds {
                failures += 1;
            }
        }
    }
    report(
        8,
        failures == 0,
        t0,
        &format!("50000 pairs, {failures} violations, smallest slack {worst:.3e}"),
    );
}

#[test]
fn criterion_9_quadratic_estimators() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut failures = Vec::new();
    for c in 0..20 {
        let d = rng.random_range(1..=8);
        let b = gaussian_vec(&mut rng, d * d);
        let a = SymMatrix::from_fn(d, |i, j| (0..d).map(|r| b[r * d + i] * b[r * d + j]).sum());
        let reference = nalgebra::DMatrix::from_row_slice(d, d, a.as_row_major())
            .symmetric_eigen()
            .eigenvalues
            .max();
        let f = Quadratic::new(a);
        let domain = BoxDomain::cube(d, -1.0, 1.0, 200).unwrap();
        let h = estimate_concavifier_hessian(&f, &domain, &mut rng).unwrap().value;
        let m = estimate_concavifier_midpoint(&f, &domain, &mut rng).unwrap().value;
        if (h - reference).abs() > 1e-8 {
            failures.push(format!("#{c} d={d}: hessian {h} vs {reference}"));
        }
        if m < reference - 1e-3 || m > reference + 1e-9 * reference.max(1.0) {
            failures.push(format!("#{c} d={d}: midpoint {m} vs {reference}"));
        }
    }
    report(9, failures.is_empty(), t0, &format!("20 matrices, failures {failures:?}"));
}

#[test]
fn bound_helpers_agree_with_report() {
    let data = generate_dataset(&NetConfig::new(4, 3, 50, 1).unwrap()).unwrap();
    let r = compute_bounds(&data, 3, CassiniVariant::Standard).unwrap();
    assert_eq!(r.alpha1, bound_alpha1(&data, 3).unwrap());
    assert_eq!(r.alpha2, bound_alpha2(&data, 3).unwrap());
    assert_eq!(r.alpha3, bound_alpha3(&data, 3).unwrap());
    assert_eq!(r.alpha4, Some(bound_alpha4(&data, 3, CassiniVariant::Standard).unwrap()));
}
