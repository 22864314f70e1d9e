use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use super::grid::{GridGeometry, WignerGrid};
use super::smearing::{smearing_covariance, CharacteristicFn, Direction};
use crate::error::{check_time, Error, Result};
use crate::linalg;
use crate::noise::{fft2, CovarianceSpec, DiffusionMatrix};
use crate::phase_space::{flow_jacobian, QuadraticHamiltonian};

/// Largest boundary mass tolerated after transport.
pub const ESCAPE_TOLERANCE: f64 = 1e-6;
const EDGE_WIDTH: usize = 2;

/// Averaged evolution of a Wigner function over time `t`: smearing by the
/// measure with symplectic transform `P̃_t`, then transport along the
/// backward flow.
pub fn evolve_wigner(w: &WignerGrid, h: &QuadraticHamiltonian, spec: &CovarianceSpec, t: f64) -> Result<WignerGrid> {
    check_time(t)?;
    check_hbar(w, h)?;
    if w.hbar <= 0.0 {
        return Err(Error::InvalidParameter("Wigner evolution needs hbar > 0; use classical_evolve".into()));
    }
    if t == 0.0 {
        return Ok(w.clone());
    }
    let mut out = w.clone();
    if !spec.is_constant() {
        let g = &w.geometry;
        let hbar = w.hbar;
        let radius = hbar * PI * (1.0 / (g.dp * g.dp) + 1.0 / (g.dq * g.dq)).sqrt();
        let phi = CharacteristicFn::new(h, spec, t, radius)?;
        apply_multiplier(&mut out, |kp, kq| phi.eval(hbar * kq, -hbar * kp));
    }
    transport(&mut out, h, t)?;
    Ok(out)
}

/// Classical counterpart: Gaussian smearing with the state-direction
/// covariance, then transport along the backward flow. A singular
/// covariance smears only along its range.
pub fn classical_evolve(rho: &WignerGrid, h: &QuadraticHamiltonian, d: &DiffusionMatrix, t: f64) -> Result<WignerGrid> {
    check_time(t)?;
    if t == 0.0 {
        return Ok(rho.clone());
    }
    let mut out = rho.clone();
    if !d.is_zero() {
        let c = smearing_covariance(h, d, t, Direction::State)?.matrix;
        apply_multiplier(&mut out, |kp, kq| {
            let k = Vector2::new(kp, kq);
            (-0.5 * (k.transpose() * c * k)[(0, 0)]).exp()
        });
    }
    transport(&mut out, h, t)?;
    Ok(out)
}

/// Density of the non-singular part `Q_t` of the smearing measure, sampled
/// on `geometry`.
pub fn q_density(h: &QuadraticHamiltonian, spec: &CovarianceSpec, t: f64, geometry: GridGeometry) -> Result<WignerGrid> {
    check_time(t)?;
    let hbar = h.hbar();
    let g = geometry;
    let (np, nq) = (g.np, g.nq);
    let dkp = 2.0 * PI / (np as f64 * g.dp);
    let dkq = 2.0 * PI / (nq as f64 * g.dq);
    let radius = hbar * PI * (1.0 / (g.dp * g.dp) + 1.0 / (g.dq * g.dq)).sqrt();
    let phi = CharacteristicFn::new(h, spec, t, radius)?;
    let mut data: Vec<Complex64> = (0..np * nq)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / nq, idx % nq);
            let kp = wrapped(i, np) * dkp;
            let kq = wrapped(j, nq) * dkq;
            let phase = kp * g.p_min + kq * g.q_min;
            Complex64::from_polar(phi.q_tilde(hbar * kq, -hbar * kp), phase)
        })
        .collect();
    fft2(&mut data, np, nq, true);
    let norm = 1.0 / (np as f64 * g.dp * nq as f64 * g.dq);
    let mut out = WignerGrid::zeros(geometry, hbar)?;
    out.classical = true;
    for (o, c) in out.values.iter_mut().zip(&data) {
        *o = c.re * norm;
    }
    Ok(out)
}

fn check_hbar(w: &WignerGrid, h: &QuadraticHamiltonian) -> Result<()> {
    if (w.hbar - h.hbar()).abs() > 1e-15 * w.hbar.max(h.hbar()) {
        return Err(Error::HbarMismatch(w.hbar, h.hbar()));
    }
    if h.dim() != 1 {
        return Err(Error::Dimension(format!("expected one canonical pair, got {}", h.dim())));
    }
    Ok(())
}

fn wrapped(i: usize, n: usize) -> f64 {
    if i < n.div_ceil(2) {
        i as f64
    } else {
        i as f64 - n as f64
    }
}

/// Multiplies the discrete Fourier transform of the grid by `f(k_p, k_q)`.
fn apply_multiplier<F: Fn(f64, f64) -> f64 + Sync>(grid: &mut WignerGrid, f: F) {
    let g = grid.geometry;
    let (np, nq) = (g.np, g.nq);
    let mut data: Vec<Complex64> = grid.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2(&mut data, np, nq, false);
    let dkp = 2.0 * PI / (np as f64 * g.dp);
    let dkq = 2.0 * PI / (nq as f64 * g.dq);
    data.par_iter_mut().enumerate().for_each(|(idx, c)| {
        let (i, j) = (idx / nq, idx % nq);
        *c *= f(wrapped(i, np) * dkp, wrapped(j, nq) * dkq);
    });
    fft2(&mut data, np, nq, true);
    let norm = (np * nq) as f64;
    for (v, c) in grid.values.iter_mut().zip(&data) {
        *v = c.re / norm;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shear {
    /// `(p, q) ↦ (p + y q, q)`
    P(f64),
    /// `(p, q) ↦ (p, q + x p)`
    Q(f64),
}

impl Shear {
    fn matrix(self) -> Matrix2<f64> {
        match self {
            Shear::P(y) => Matrix2::new(1.0, y, 0.0, 1.0),
            Shear::Q(x) => Matrix2::new(1.0, 0.0, x, 1.0),
        }
    }

    fn size(self) -> f64 {
        match self {
            Shear::P(v) | Shear::Q(v) => v.abs(),
        }
    }
}

fn three_shears(m: &Matrix2<f64>) -> Option<Vec<Shear>> {
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let by_b = (b != 0.0).then(|| vec![Shear::Q((d - 1.0) / b), Shear::P(b), Shear::Q((a - 1.0) / b)]);
    let by_c = (c != 0.0).then(|| vec![Shear::P((a - 1.0) / c), Shear::Q(c), Shear::P((d - 1.0) / c)]);
    let cost = |v: &Vec<Shear>| v.iter().map(|s| s.size()).fold(0.0, f64::max);
    match (by_b, by_c) {
        (Some(x), Some(y)) => Some(if cost(&x) <= cost(&y) { x } else { y }),
        (x, y) => x.or(y),
    }
}

/// Factors a unimodular matrix into shears `S₁ S₂ ⋯`, listed left to right.
fn shear_factors(m: &Matrix2<f64>) -> Vec<Shear> {
    if m.trace() < 0.0 {
        // −1 as two quarter turns
        let quarter = [Shear::Q(1.0), Shear::P(-1.0), Shear::Q(1.0)];
        let mut out: Vec<Shear> = quarter.iter().chain(quarter.iter()).copied().collect();
        out.extend(shear_factors(&(-m)));
        return out;
    }
    let direct = three_shears(m);
    let mut best: Option<Vec<Shear>> = direct;
    for s in [1.0, -1.0] {
        if let Some(mut v) = three_shears(&(m * Shear::Q(s).matrix())) {
            v.push(Shear::Q(-s));
            let cost = |v: &Vec<Shear>| v.iter().map(|s| s.size()).fold(0.0, f64::max);
            if best.as_ref().is_none_or(|b| cost(&v) < 0.5 * cost(b)) {
                best = Some(v);
            }
        }
    }
    let mut out = best.expect("a unimodular matrix always has a shear factorisation");
    out.retain(|s| s.size() != 0.0);
    out
}

/// `w ↦ w ∘ J_{−t}` by exact Fourier shifts.
fn transport(grid: &mut WignerGrid, h: &QuadraticHamiltonian, t: f64) -> Result<()> {
    let m = linalg::to_matrix2(&flow_jacobian(h, -t)?.matrix);
    for s in shear_factors(&m) {
        apply_shear(grid, s);
        let edge = grid.edge_mass(EDGE_WIDTH);
        if edge > ESCAPE_TOLERANCE {
            return Err(Error::SupportEscape(edge));
        }
    }
    Ok(())
}

fn apply_shear(grid: &mut WignerGrid, s: Shear) {
    let g = grid.geometry;
    let (np, nq) = (g.np, g.nq);
    match s {
        Shear::P(y) => {
            // for each q_j shift along p by y q_j
            let mut cols: Vec<Vec<f64>> = (0..nq).map(|j| (0..np).map(|i| grid.values[i * nq + j]).collect()).collect();
            cols.par_iter_mut().enumerate().for_each(|(j, col)| shift(col, y * g.q(j), g.dp));
            for (j, col) in cols.iter().enumerate() {
                for (i, v) in col.iter().enumerate() {
                    grid.values[i * nq + j] = *v;
                }
            }
        }
        Shear::Q(x) => {
            grid.values
                .par_chunks_mut(nq)
                .enumerate()
                .for_each(|(i, row)| shift(row, x * g.p(i), g.dq));
        }
    }
}

/// `f(x) ↦ f(x + delta)` for a periodic sample with spacing `h`.
fn shift(f: &mut [f64], delta: f64, h: f64) {
    let n = f.len();
    if delta == 0.0 {
        return;
    }
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fwd.process(&mut buf);
    let dk = 2.0 * PI / (n as f64 * h);
    for (m, c) in buf.iter_mut().enumerate() {
        let k = wrapped(m, n) * dk;
        if n % 2 == 0 && m == n / 2 {
            *c *= (k * delta).cos();
        } else {
            *c *= Complex64::from_polar(1.0, k * delta);
        }
    }
    inv.process(&mut buf);
    for (v, c) in f.iter_mut().zip(&buf) {
        *v = c.re / n as f64;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semigroup::moments::{propagate_moments, GaussianMoments};
    use proptest::prelude::*;

    fn state(hbar: f64, n: usize, half: f64) -> WignerGrid {
        let geo = GridGeometry::symmetric(n, n, half, half).unwrap();
        let s = hbar / 2.0;
        WignerGrid::gaussian(geo, hbar, [0.4, -0.3], Matrix2::new(s, 0.1 * s, 0.1 * s, s * 1.01)).unwrap()
    }

    #[test]
    fn shear_factorisation_reproduces_matrix() {
        let mats = [
            Matrix2::new(1.0, 0.0, -2.0, 1.0),
            Matrix2::new(0.3f64.cos(), -0.3f64.sin(), 0.3f64.sin(), 0.3f64.cos()),
            Matrix2::new(-1.0, 0.0, 0.0, -1.0),
            Matrix2::new(2.0, 0.0, 0.0, 0.5),
            Matrix2::new(3.0f64.cos(), -3.0f64.sin(), 3.0f64.sin(), 3.0f64.cos()),
            Matrix2::new(1.0, 1e-9, 0.0, 1.0),
        ];
        for m in mats {
            let prod = shear_factors(&m).iter().fold(Matrix2::identity(), |acc, s| acc * s.matrix());
            assert!((prod - m).abs().max() < 1e-7, "{m} -> {prod}");
            assert!(shear_factors(&m).iter().all(|s| s.size() < 10.0), "{:?}", shear_factors(&m));
        }
    }

    #[test]
    fn shift_is_exact_for_band_limited() {
        let n = 64;
        let h = 2.0 * PI / n as f64;
        let mut f: Vec<f64> = (0..n).map(|i| (3.0 * i as f64 * h).sin() + 0.5).collect();
        shift(&mut f, 0.37, h);
        for (i, v) in f.iter().enumerate() {
            let x = i as f64 * h + 0.37;
            assert!((v - ((3.0 * x).sin() + 0.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_time_unchanged() {
        let w = state(1.0, 64, 8.0);
        let h = QuadraticHamiltonian::free(1.0, 1.0).unwrap();
        let spec = CovarianceSpec::gaussian_q(1.0, 1.0).unwrap();
        assert_eq!(evolve_wigner(&w, &h, &spec, 0.0).unwrap(), w);
    }

    #[test]
    fn harmonic_transport_rotates() {
        let w = state(1.0, 128, 10.0);
        let h = QuadraticHamiltonian::harmonic(1.0, 1.0, 1.0).unwrap();
        let spec = CovarianceSpec::constant(1.0).unwrap();
        let t = 0.9;
        let out = evolve_wigner(&w, &h, &spec, t).unwrap();
        let j = linalg::to_matrix2(&flow_jacobian(&h, -t).unwrap().matrix);
        let s: f64 = 0.5;
        let cov = Matrix2::new(s, 0.1 * s, 0.1 * s, s * 1.01);
        let inv = cov.try_inverse().unwrap();
        let norm = 1.0 / (2.0 * PI * cov.determinant().sqrt());
        let g = out.geometry;
        let mut err: f64 = 0.0;
        for i in 0..g.np {
            for k in 0..g.nq {
                let z = j * Vector2::new(g.p(i), g.q(k)) - Vector2::new(0.4, -0.3);
                let exact = norm * (-0.5 * (z.transpose() * inv * z)[(0, 0)]).exp();
                err = err.max((out.get(i, k) - exact).abs());
            }
        }
        assert!(err < 1e-10, "{err}");
        assert!((out.purity() - w.purity()).abs() < 1e-10);
    }

    #[test]
    fn grid_moments_match_propagation() {
        let hbar = 1.0;
        let w = state(hbar, 128, 14.0);
        let spec = CovarianceSpec::gaussian_q(1.0, 1.0).unwrap();
        let d = spec.diffusion_matrix();
        let (mean, cov) = w.moments();
        let init = GaussianMoments::new(mean, cov);
        for h in [QuadraticHamiltonian::free(1.0, hbar).unwrap(), QuadraticHamiltonian::harmonic(1.0, 1.0, hbar).unwrap()] {
            let t = 1.5;
            let out = evolve_wigner(&w, &h, &spec, t).unwrap();
            assert!((out.mass() - 1.0).abs() < 1e-9);
            let s = propagate_moments(&h, &d, &init, t).unwrap();
            let p2 = out.expectation(|p, _| p * p);
            let q2 = out.expectation(|_, q| q * q);
            assert!((p2 / s.p2 - 1.0).abs() < 1e-3, "{p2} vs {}", s.p2);
            assert!((q2 / s.q2 - 1.0).abs() < 1e-3, "{q2} vs {}", s.q2);
        }
    }

    #[test]
    fn escape_is_reported() {
        let w = state(1.0, 64, 4.0);
        let h = QuadraticHamiltonian::free(1.0, 1.0).unwrap();
        let spec = CovarianceSpec::constant(1.0).unwrap();
        assert!(matches!(evolve_wigner(&w, &h, &spec, 30.0), Err(Error::SupportEscape(_))));
    }

    #[test]
    fn classical_free_spreading() {
        let geo = GridGeometry::symmetric(128, 128, 14.0, 14.0).unwrap();
        let rho = WignerGrid::gaussian(geo, 0.0, [0.0, 0.0], Matrix2::new(0.5, 0.0, 0.0, 0.5)).unwrap().as_classical();
        let h = QuadraticHamiltonian::free(1.0, 0.0).unwrap();
        let d = DiffusionMatrix::new(0.5, 0.0, 0.0).unwrap();
        let t = 2.0;
        let out = classical_evolve(&rho, &h, &d, t).unwrap();
        assert!(out.values.iter().all(|&v| v >= -1e-10));
        let (_, cov) = out.moments();
        let expected_qq = 0.5 + t * t * 0.5 + 2.0 / 3.0 * t.powi(3) * 0.5;
        assert!((cov[(1, 1)] / expected_qq - 1.0).abs() < 0.01);
        assert!(out.bg_entropy() > rho.bg_entropy());
    }

    #[test]
    fn q_density_isotropic_harmonic() {
        let h = QuadraticHamiltonian::harmonic(1.0, 1.0, 1.0).unwrap();
        let spec = CovarianceSpec::gaussian(1.0, 1.0, 1.0).unwrap();
        let geo = GridGeometry::symmetric(64, 64, 16.0, 16.0).unwrap();
        let dens = q_density(&h, &spec, 1.0, geo).unwrap();
        assert!((dens.mass() - (1.0 - (-1.0f64).exp())).abs() < 1e-8);
        // density at the origin: (2π)⁻² e^{-1} Σ 2π/(n·n!)
        let series: f64 = (1..30).map(|n| 2.0 * PI / (n as f64 * (1..=n).map(f64::from).product::<f64>())).sum();
        let expected = (-1.0f64).exp() * series / (4.0 * PI * PI);
        assert!((dens.get(32, 32) - expected).abs() < 1e-8, "{} vs {expected}", dens.get(32, 32));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn semigroup_composition(s in 0.1f64..1.0, t in 0.1f64..1.0) {
            let w = state(1.0, 128, 18.0);
            let h = QuadraticHamiltonian::harmonic(1.0, 0.8, 1.0).unwrap();
            let spec = CovarianceSpec::gaussian_q(0.5, 1.0).unwrap();
            let a = evolve_wigner(&evolve_wigner(&w, &h, &spec, s).unwrap(), &h, &spec, t).unwrap();
            let b = evolve_wigner(&w, &h, &spec, s + t).unwrap();
            prop_assert!(a.max_abs_diff(&b) < 1e-5);
        }
    }
}
