use std::hint::black_box;

use avgdyn::{
    discretize_bath, evolve_wigner, simulate_classical, simulate_total_system, thermal_values, CovarianceSpec,
    GaussianMoments, GreenFunction, GridGeometry, QuadraticHamiltonian, SimulationConfig, SpectralDensity,
    ThermalMethod, WignerGrid,
};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn wigner(c: &mut Criterion) {
    let h = QuadraticHamiltonian::harmonic(1.0, 1.0, 1.0).unwrap();
    let noise = CovarianceSpec::gaussian_q(0.1, 1.0).unwrap();
    let init = GaussianMoments::coherent(0.0, 1.0, 1.0, 1.0);
    let mut g = c.benchmark_group("evolve_wigner");
    g.sample_size(10);
    for n in [128usize, 256] {
        let geo = GridGeometry::symmetric(n, n, 12.0, 12.0).unwrap();
        let w = WignerGrid::gaussian(geo, 1.0, init.mean, init.cov_matrix()).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &w, |b, w| {
            b.iter(|| evolve_wigner(black_box(w), &h, &noise, 1.0).unwrap())
        });
    }
    g.finish();
}

fn bath(c: &mut Criterion) {
    let drude = SpectralDensity::drude(0.2, 3.0).unwrap();
    c.bench_function("green_function_drude", |b| {
        b.iter(|| GreenFunction::new(black_box(&drude), 1.0, 1.0, 40.0).unwrap())
    });
    let mut g = c.benchmark_group("thermal_values");
    for (name, m) in [
        ("spectral_integral", ThermalMethod::SpectralIntegral),
        ("pv_integral", ThermalMethod::PvIntegral),
        ("matsubara", ThermalMethod::Matsubara),
    ] {
        g.bench_function(name, |b| b.iter(|| thermal_values(&drude, 1.0, 1.0, black_box(2.0), 1.0, m).unwrap()));
    }
    g.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let times: Vec<f64> = (1..=10).map(|i| 0.5 * i as f64).collect();
    let free = QuadraticHamiltonian::free(1.0, 1.0).unwrap();
    let noise = CovarianceSpec::gaussian_q(1.0, 1.0).unwrap();
    let point = GaussianMoments::point(0.0, 0.0);
    let cfg = SimulationConfig::new(100_000, times.clone(), 1, free, noise.clone(), point).unwrap();
    let mut g = c.benchmark_group("monte_carlo");
    g.sample_size(10);
    g.bench_function("classical_free_1e5", |b| b.iter(|| simulate_classical(black_box(&cfg)).unwrap()));

    let h = QuadraticHamiltonian::harmonic(1.0, 1.0, 1.0).unwrap();
    let spectral = SpectralDensity::drude(0.2, 3.0).unwrap();
    let spec = discretize_bath(&spectral, 40, 30.0, 1.0, 1.0).unwrap();
    let init = GaussianMoments::coherent(0.0, 1.0, 1.0, 1.0);
    let cfg = SimulationConfig::new(20_000, times, 1, h, noise, init).unwrap().with_bath(spec);
    g.bench_function("total_system_40_modes_2e4", |b| {
        b.iter(|| simulate_total_system(black_box(&cfg), 1.0, 1.0).unwrap())
    });
    g.finish();
}

criterion_group!(benches, wigner, bath, monte_carlo);
criterion_main!(benches);
