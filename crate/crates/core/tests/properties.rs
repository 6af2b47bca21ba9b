use concavify::eigen::kron_allones_structure_lambda;
use concavify::objective::{finite_difference_hessian, gradient_relative_error};
use concavify::relu::{allactive_gram, hessian, is_kink_free, loss, second_moment};
use concavify::*;
use proptest::prelude::*;

fn symmetric(max_n: usize) -> impl Strategy<Value = SymMatrix> {
    (1..=max_n).prop_flat_map(|n| {
        prop::collection::vec(-5.0f64..5.0, n * n)
            .prop_map(move |v| SymMatrix::from_fn(n, |i, j| 0.5 * (v[i * n + j] + v[j * n + i])))
    })
}

fn psd(max_n: usize) -> impl Strategy<Value = SymMatrix> {
    (1..=max_n).prop_flat_map(|n| {
        prop::collection::vec(-2.0f64..2.0, n * n).prop_map(move |b| {
            SymMatrix::from_fn(n, |i, j| (0..n).map(|r| b[r * n + i] * b[r * n + j]).sum())
        })
    })
}

fn eigenvalues(m: &SymMatrix) -> Vec<f64> {
    let n = m.size();
    let mut ev: Vec<f64> = nalgebra::DMatrix::from_row_slice(n, n, m.as_row_major())
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(f64::total_cmp);
    ev
}

fn small_config() -> impl Strategy<Value = NetConfig> {
    (1usize..=6, 1usize..=4, 1usize..=40, any::<u64>())
        .prop_map(|(d, k, n, seed)| NetConfig::new(d, k, n, seed).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gershgorin_and_cassini_bound_the_spectrum(m in symmetric(30)) {
        let top = *eigenvalues(&m).last().unwrap();
        let g = gershgorin_upper(&m);
        prop_assert!(top <= g + 1e-9 * g.abs().max(1.0));
        if m.size() >= 2 {
            let c = brauer_cassini_upper(&m, CassiniVariant::Standard).unwrap();
            prop_assert!(top <= c + 1e-9 * c.abs().max(1.0));
            prop_assert!(c <= g + 1e-9 * g.abs().max(1.0));
        }
    }

    #[test]
    fn lambda_max_matches_dense_solver(m in symmetric(20)) {
        let ev = eigenvalues(&m);
        let top = *ev.last().unwrap();
        let spread = ev.last().unwrap() - ev.first().unwrap();
        let r = lambda_max(&m).unwrap();
        // slow convergence on near-ties only moves the estimate within the cluster
        prop_assert!(r.value <= top + 1e-8 * spread.max(1.0));
        prop_assert!(r.value >= top - 1e-4 * spread.max(1.0), "{} vs {}", r.value, top);
    }

    #[test]
    fn power_iteration_on_psd(m in psd(12)) {
        let top = *eigenvalues(&m).last().unwrap();
        let r = power_iteration(&m).unwrap();
        prop_assert!(r.converged);
        prop_assert!(r.value <= top * (1.0 + 1e-10) + 1e-12);
        prop_assert!(r.residual(&m) <= 1e-8 * r.value.max(1.0));
    }

    #[test]
    fn bound_chain_holds(cfg in small_config()) {
        let data = generate_dataset(&cfg).unwrap();
        let r = compute_bounds(&data, cfg.k, CassiniVariant::Standard).unwrap();
        prop_assert!(r.ordering_violations(1e-9).is_empty(), "{:?}", r.ordering_violations(1e-9));
        let unhalved = compute_bounds(&data, cfg.k, CassiniVariant::Unhalved).unwrap();
        if let (Some(p), Some(s)) = (unhalved.alpha4, r.alpha4) {
            prop_assert!(p >= s - 1e-12 * s.abs().max(1.0));
        }
    }

    #[test]
    fn kronecker_fast_path(cfg in small_config()) {
        let data = generate_dataset(&cfg).unwrap();
        let fast = kron_allones_structure_lambda(&second_moment(&data), cfg.k).unwrap();
        let m = allactive_gram(&data, cfg.k).unwrap();
        let top = *eigenvalues(&m).last().unwrap();
        prop_assert!((fast - top).abs() <= 1e-8 * top.max(1.0), "{fast} vs {top}");
    }

    #[test]
    fn relu_derivatives_match_finite_differences(cfg in small_config(), scale in 0.2f64..3.0) {
        let data = generate_dataset(&cfg).unwrap();
        let w = initial_weights_scaled(&data, scale);
        prop_assume!(is_kink_free(&w, &data, 1e-3));
        let f = ReluLoss::new(&data);
        prop_assert!(gradient_relative_error(&f, w.as_slice()).unwrap() < 1e-5);
        let h = hessian(&w, &data).unwrap();
        let fd = finite_difference_hessian(&f, w.as_slice());
        for (a, b) in h.as_row_major().iter().zip(fd.as_row_major()) {
            prop_assert!((a - b).abs() <= 1e-4 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn descent_on_quadratics_never_increases(a in psd(6), start in prop::collection::vec(-3.0f64..3.0, 6)) {
        let n = a.size();
        let top = *eigenvalues(&a).last().unwrap();
        prop_assume!(top > 1e-6);
        let f = Quadratic::new(a);
        let trace = run_descent(&f, &DescentConfig::new(1.0 / top, 50, start[..n].to_vec())).unwrap();
        prop_assert!(trace.monotone);
        prop_assert!(trace.descent_violations().is_empty());
    }

    #[test]
    fn loss_is_nonnegative_and_zero_at_teacher(cfg in small_config()) {
        let data = generate_dataset(&cfg).unwrap();
        prop_assert_eq!(loss(data.teacher(), &data).unwrap(), 0.0);
        let z = Weights::zeros(cfg.k, cfg.d);
        prop_assert!(loss(&z, &data).unwrap() >= 0.0);
    }
}

fn initial_weights_scaled(data: &ReluDataset, scale: f64) -> Weights {
    let w = concavify::relu::initial_weights(data, StudentInit::Gaussian);
    let (k, d) = (w.k(), w.d());
    Weights::new(k, d, w.into_vec().into_iter().map(|v| v * scale).collect()).unwrap()
}
