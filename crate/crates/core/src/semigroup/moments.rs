use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use super::smearing::{smearing_covariance, Direction};
use crate::error::{check_time, Error, Result};
use crate::noise::{CurvatureTable, DiffusionMatrix};
use crate::phase_space::{flow_jacobian, QuadraticHamiltonian};
use crate::linalg;

/// First and second moments of a state, `(p, q)` ordering.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianMoments {
    pub mean: [f64; 2],
    /// Covariance matrix `[[Var p, Cov], [Cov, Var q]]`.
    pub cov: [[f64; 2]; 2],
}

impl GaussianMoments {
    pub fn new(mean: [f64; 2], cov: Matrix2<f64>) -> Self {
        Self { mean, cov: [[cov[(0, 0)], cov[(0, 1)]], [cov[(1, 0)], cov[(1, 1)]]] }
    }

    /// Minimum-uncertainty state with `Var q = σ²` and `Var p = ħ²/4σ²`.
    pub fn coherent(p0: f64, q0: f64, sigma_q: f64, hbar: f64) -> Self {
        let vq = sigma_q * sigma_q;
        let vp = hbar * hbar / (4.0 * vq);
        Self::new([p0, q0], Matrix2::new(vp, 0.0, 0.0, vq))
    }

    pub fn point(p0: f64, q0: f64) -> Self {
        Self::new([p0, q0], Matrix2::zeros())
    }

    pub fn mean_vector(&self) -> Vector2<f64> {
        Vector2::new(self.mean[0], self.mean[1])
    }

    pub fn cov_matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.cov[0][0], self.cov[0][1], self.cov[1][0], self.cov[1][1])
    }

    /// `⟨zzᵀ⟩`.
    pub fn raw_second(&self) -> Matrix2<f64> {
        let m = self.mean_vector();
        self.cov_matrix() + m * m.transpose()
    }

    /// Second and fourth moments of the linear form `a·p + b·q`, exact for
    /// Gaussian states.
    pub fn linear_form_moments(&self, a: f64, b: f64) -> (f64, f64) {
        let v = Vector2::new(a, b);
        let mu = v.dot(&self.mean_vector());
        let var = (v.transpose() * self.cov_matrix() * v)[(0, 0)];
        (mu * mu + var, mu.powi(4) + 6.0 * mu * mu * var + 3.0 * var * var)
    }
}

/// Moments of a state at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSnapshot {
    pub t: f64,
    pub p: f64,
    pub q: f64,
    pub p2: f64,
    pub pq: f64,
    pub q2: f64,
    /// `⟨H⟩`.
    pub energy: f64,
}

impl MomentSnapshot {
    pub fn var_p(&self) -> f64 {
        self.p2 - self.p * self.p
    }

    pub fn var_q(&self) -> f64 {
        self.q2 - self.q * self.q
    }
}

/// Rate of change of the mean energy, `D₀₂ ∂²_pH + D₁₁ ∂_p∂_qH + D₂₀ ∂²_qH`.
pub fn energy_rate(h: &QuadraticHamiltonian, d: &DiffusionMatrix) -> Result<f64> {
    let (hpp, hpq, hqq) = h.curvature()?;
    Ok(d.d02 * hpp + d.d11 * hpq + d.d20 * hqq)
}

/// Exact first and second moments under the averaged dynamics.
pub fn propagate_moments(
    h: &QuadraticHamiltonian,
    d: &DiffusionMatrix,
    initial: &GaussianMoments,
    t: f64,
) -> Result<MomentSnapshot> {
    check_time(t)?;
    let j = linalg::to_matrix2(&flow_jacobian(h, t)?.matrix);
    let c = smearing_covariance(h, d, t, Direction::Observable)?.matrix;
    let mean = j * initial.mean_vector();
    let second = j * initial.raw_second() * j.transpose() + c;
    let a = linalg::to_matrix2(h.coeffs());
    let energy = 0.5 * (a * second).trace();
    Ok(MomentSnapshot { t, p: mean[0], q: mean[1], p2: second[(0, 0)], pq: second[(0, 1)], q2: second[(1, 1)], energy })
}

/// `d_μ(t) = Σ_ν D_{μ−ν,ν} t^{ν+1} / ((ν+1) m^ν)`.
pub fn free_d_poly(mass: f64, table: &CurvatureTable, mu: u32, t: f64) -> f64 {
    (0..=mu)
        .map(|nu| table.get(mu - nu, nu) * t.powi(nu as i32 + 1) / ((nu as f64 + 1.0) * mass.powi(nu as i32)))
        .sum()
}

/// `⟨q⁴⟩_t` for `H = p²/2m`, given `⟨(q + tp/m)²⟩₀` and `⟨(q + tp/m)⁴⟩₀`:
/// `x4 + 12 (x2 d₂ + 2ħ² d₄ + d₂²)`.
pub fn free_q4_moment(mass: f64, table: &CurvatureTable, hbar: f64, x2: f64, x4: f64, t: f64) -> Result<f64> {
    check_time(t)?;
    if !(mass > 0.0) {
        return Err(Error::InvalidParameter(format!("mass must be positive, got {mass}")));
    }
    let d2 = free_d_poly(mass, table, 2, t);
    let d4 = free_d_poly(mass, table, 4, t);
    Ok(x4 + 12.0 * (x2 * d2 + 2.0 * hbar * hbar * d4 + d2 * d2))
}

/// [`free_q4_moment`] for a Gaussian initial state.
pub fn free_q4_gaussian(mass: f64, table: &CurvatureTable, hbar: f64, initial: &GaussianMoments, t: f64) -> Result<f64> {
    let (x2, x4) = initial.linear_form_moments(t / mass, 1.0);
    free_q4_moment(mass, table, hbar, x2, x4, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::CovarianceSpec;
    use proptest::prelude::*;

    #[test]
    fn free_moments() {
        let h = QuadraticHamiltonian::free(2.0, 1.0).unwrap();
        let d = DiffusionMatrix::new(0.5, 0.2, 0.1).unwrap();
        let init = GaussianMoments::new([0.3, -1.0], Matrix2::new(0.4, 0.1, 0.1, 0.9));
        let t = 1.5;
        let m = 2.0;
        let s = propagate_moments(&h, &d, &init, t).unwrap();
        let raw = init.raw_second();
        let (p2, pq, q2) = (raw[(0, 0)], raw[(0, 1)], raw[(1, 1)]);
        assert!((s.p - 0.3).abs() < 1e-14);
        assert!((s.q - (-1.0 + t * 0.3 / m)).abs() < 1e-14);
        assert!((s.p2 - (p2 + 2.0 * t * 0.5)).abs() < 1e-13);
        let pq_expected = pq + t * p2 / m + t * 0.2 + t * t * 0.5 / m;
        assert!((s.pq - pq_expected).abs() < 1e-13);
        let x2 = q2 + 2.0 * t * pq / m + t * t * p2 / (m * m);
        let q2_expected = x2 + 2.0 * t * 0.1 + t * t * 0.2 / m + 2.0 / 3.0 * t.powi(3) * 0.5 / (m * m);
        assert!((s.q2 - q2_expected).abs() < 1e-13);
    }

    #[test]
    fn harmonic_energy_rate() {
        let h = QuadraticHamiltonian::harmonic(1.0, 1.0, 1.0).unwrap();
        let d = DiffusionMatrix::new(0.5, 0.0, 0.25).unwrap();
        assert_eq!(energy_rate(&h, &d).unwrap(), 0.75);
        let init = GaussianMoments::coherent(1.0, 0.5, 0.8, 1.0);
        let e0 = propagate_moments(&h, &d, &init, 0.0).unwrap().energy;
        for &t in &[0.5, 2.0, 9.0] {
            let e = propagate_moments(&h, &d, &init, t).unwrap().energy;
            assert!((e - e0 - 0.75 * t).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn zero_time_and_zero_noise() {
        let h = QuadraticHamiltonian::harmonic(1.3, 0.7, 1.0).unwrap();
        let init = GaussianMoments::coherent(1.0, 0.5, 0.8, 1.0);
        let s = propagate_moments(&h, &DiffusionMatrix::new(0.5, 0.0, 0.25).unwrap(), &init, 0.0).unwrap();
        let raw = init.raw_second();
        assert_eq!((s.p, s.q), (1.0, 0.5));
        assert!((s.p2 - raw[(0, 0)]).abs() < 1e-15 && (s.q2 - raw[(1, 1)]).abs() < 1e-15);
        let t = 3.0;
        let s = propagate_moments(&h, &DiffusionMatrix::zero(), &init, t).unwrap();
        let j = linalg::to_matrix2(&flow_jacobian(&h, t).unwrap().matrix);
        let second = j * raw * j.transpose();
        assert!((s.p2 - second[(0, 0)]).abs() < 1e-14 && (s.q2 - second[(1, 1)]).abs() < 1e-14);
    }

    #[test]
    fn q4_values() {
        let table = CurvatureTable::default().with(0, 2, 0.5);
        // point state at the origin
        let v = free_q4_moment(1.0, &table, 1.0, 0.0, 0.0, 1.0).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
        // no noise: pure transport
        let init = GaussianMoments::coherent(0.2, 0.1, 0.7, 1.0);
        let (_, x4) = init.linear_form_moments(2.0, 1.0);
        let v = free_q4_gaussian(1.0, &CurvatureTable::default(), 1.0, &init, 2.0).unwrap();
        assert_eq!(v, x4);
        // Gaussian noise of unit length: D₀₂ = ½, D₀₄ = ⅛
        let table = CovarianceSpec::gaussian_q(1.0, 1.0).unwrap().curvature_table(4);
        let init = GaussianMoments::new([0.0, 0.0], Matrix2::new(0.5, 0.0, 0.0, 0.5));
        let v = free_q4_gaussian(1.0, &table, 1.0, &init, 1.0).unwrap();
        let expected = 3.0 + 12.0 * (1.0 / 6.0 + 2.0 / 40.0 + 1.0 / 36.0);
        assert!((v - expected).abs() < 1e-13, "{v} vs {expected}");
    }

    proptest! {
        #[test]
        fn quadratic_moments_independent_of_hbar(hbar in 0.01f64..5.0, t in 0.0f64..4.0) {
            let init = GaussianMoments::new([0.3, 0.2], Matrix2::new(1.0, 0.1, 0.1, 2.0));
            let d = DiffusionMatrix::new(0.4, 0.1, 0.3).unwrap();
            let a = propagate_moments(&QuadraticHamiltonian::one_dof(1.0, 0.2, 0.6, 1.0).unwrap(), &d, &init, t).unwrap();
            let b = propagate_moments(&QuadraticHamiltonian::one_dof(1.0, 0.2, 0.6, hbar).unwrap(), &d, &init, t).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
