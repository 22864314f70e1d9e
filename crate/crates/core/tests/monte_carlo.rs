use avgdyn::*;
use nalgebra::Matrix2;
use proptest::prelude::*;

fn harmonic_config(trajectories: usize, seed: u64) -> SimulationConfig {
    let h = QuadraticHamiltonian::harmonic(1.2, 0.9, 1.0).unwrap();
    let noise = CovarianceSpec::gaussian(0.5, 2.0, 1.0).unwrap();
    let init = GaussianMoments::new([0.3, -0.4], Matrix2::new(0.4, 0.05, 0.05, 0.3));
    SimulationConfig::new(trajectories, vec![0.5, 2.0, 4.0], seed, h, noise, init).unwrap()
}

#[test]
fn analytic_moments_inside_three_sigma_for_twenty_seeds() {
    let base = harmonic_config(20_000, 0);
    let d = base.noise.diffusion_matrix();
    let mut inside = 0;
    let mut total = 0;
    for seed in 100..120 {
        let est = simulate_classical(&base.clone().with_seed(seed)).unwrap();
        for (k, &t) in base.times.iter().enumerate() {
            let s = propagate_moments(&base.hamiltonian, &d, &base.initial, t).unwrap();
            for (e, target) in [(est.p[k].second, s.p2), (est.q[k].second, s.q2)] {
                total += 1;
                inside += e.contains(target, 3.0) as usize;
            }
        }
    }
    assert!(inside as f64 >= 0.99 * total as f64, "{inside} of {total} inside 3σ");
}

#[test]
fn stderr_agrees_with_batch_spread() {
    let batches = 40;
    let cfg = harmonic_config(5_000, 0);
    let runs: Vec<MomentEstimate> =
        (0..batches).map(|b| simulate_classical(&cfg.clone().with_seed(1000 + b)).unwrap()).collect();
    let vals: Vec<f64> = runs.iter().map(|r| r.q[2].variance.value).collect();
    let mean = vals.iter().sum::<f64>() / batches as f64;
    let spread = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (batches as f64 - 1.0)).sqrt();
    let reported = runs.iter().map(|r| r.q[2].variance.stderr).sum::<f64>() / batches as f64;
    // sample sd of 40 batch values is itself uncertain by ~11%
    assert!((spread / reported - 1.0).abs() < 0.35, "spread {spread} vs stderr {reported}");
}

#[test]
fn csv_has_one_row_per_statistic() {
    let est = simulate_classical(&harmonic_config(100, 3)).unwrap();
    let mut buf = Vec::new();
    est.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("time,observable,estimate,stderr,n_traj,seed"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3 * 2 * 5);
    assert!(rows.iter().all(|r| r.ends_with(",100,3") && r.split(',').count() == 6));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn estimates_do_not_depend_on_chunking_order(seed in 0u64..1000, n in 2usize..9000) {
        let cfg = harmonic_config(n, seed);
        let a = simulate_classical(&cfg).unwrap();
        let b = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| simulate_classical(&cfg).unwrap());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn zero_noise_point_state_has_no_spread(p in -2.0f64..2.0, q in -2.0f64..2.0, t in 0.1f64..5.0) {
        let h = QuadraticHamiltonian::harmonic(1.0, 1.3, 1.0).unwrap();
        let cfg = SimulationConfig::new(10, vec![t], 1, h.clone(), CovarianceSpec::constant(0.0).unwrap(),
            GaussianMoments::point(p, q)).unwrap();
        let est = simulate_classical(&cfg).unwrap();
        let z = flow_jacobian(&h, t).unwrap().as_matrix2() * nalgebra::Vector2::new(p, q);
        prop_assert!((est.p[0].mean.value - z[0]).abs() < 1e-12);
        prop_assert!((est.q[0].mean.value - z[1]).abs() < 1e-12);
        prop_assert!(est.p[0].variance.value.abs() < 1e-20);
    }
}
