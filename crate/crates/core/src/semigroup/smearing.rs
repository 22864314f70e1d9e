use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{check_time, Error, Result};
use crate::noise::{CovarianceSpec, DiffusionMatrix};
use crate::phase_space::{flow_jacobian, symplectic_adjoint, QuadraticHamiltonian};
use crate::{linalg, quad};

/// Which way the flow enters the smearing integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `2∫₀ᵗ J_{−s} D J_{−s}ᵀ ds`, the smearing applied before transport.
    State,
    /// `2∫₀ᵗ J_s D J_sᵀ ds`, the covariance added to transported moments.
    Observable,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::State => -1.0,
            Direction::Observable => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmearingCovariance {
    pub t: f64,
    pub matrix: Matrix2<f64>,
    pub direction: Direction,
}

/// Recognised closed-form Hamiltonians of one canonical pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Kind {
    Free { mass: f64 },
    Harmonic { mass: f64, omega: f64 },
    General,
}

pub(crate) fn classify(h: &QuadraticHamiltonian) -> Kind {
    let Ok((hpp, hpq, hqq)) = h.curvature() else {
        return Kind::General;
    };
    if hpp > 0.0 && hpq == 0.0 {
        let mass = 1.0 / hpp;
        if hqq == 0.0 {
            return Kind::Free { mass };
        }
        if hqq > 0.0 {
            return Kind::Harmonic { mass, omega: (hqq / mass).sqrt() };
        }
    }
    Kind::General
}

fn require_single_pair(h: &QuadraticHamiltonian) -> Result<()> {
    if h.dim() != 1 {
        return Err(Error::Dimension(format!("expected one canonical pair, got {}", h.dim())));
    }
    Ok(())
}

/// Covariance of the smearing measure after time `t`.
pub fn smearing_covariance(
    h: &QuadraticHamiltonian,
    d: &DiffusionMatrix,
    t: f64,
    direction: Direction,
) -> Result<SmearingCovariance> {
    check_time(t)?;
    require_single_pair(h)?;
    let matrix = match classify(h) {
        Kind::Free { mass } => free_closed_form(mass, d, t, direction.sign()),
        Kind::Harmonic { mass, omega } => harmonic_closed_form(mass, omega, d, t, direction.sign()),
        Kind::General => smearing_by_quadrature(h, d, t, direction)?,
    };
    Ok(SmearingCovariance { t, matrix, direction })
}

fn free_closed_form(m: f64, d: &DiffusionMatrix, t: f64, sign: f64) -> Matrix2<f64> {
    let (a, b, c) = (d.d02, 0.5 * d.d11, d.d20);
    let pp = 2.0 * t * a;
    let pq = sign * t * t * a / m + 2.0 * t * b;
    let qq = 2.0 / 3.0 * t.powi(3) * a / (m * m) + sign * 2.0 * t * t * b / m + 2.0 * t * c;
    Matrix2::new(pp, pq, pq, qq)
}

fn harmonic_closed_form(m: f64, omega: f64, d: &DiffusionMatrix, t: f64, sign: f64) -> Matrix2<f64> {
    let (a, b, c) = (d.d02, 0.5 * d.d11, d.d20);
    let mu = m * omega;
    let s2 = (2.0 * omega * t).sin() / (4.0 * omega);
    let i_cc = 0.5 * t + s2;
    let i_ss = 0.5 * t - s2;
    let i_cs = sign * (omega * t).sin().powi(2) / (2.0 * omega);
    let pp = a * i_cc - 2.0 * mu * b * i_cs + mu * mu * c * i_ss;
    let pq = a * i_cs / mu - b * i_ss + b * i_cc - mu * c * i_cs;
    let qq = a * i_ss / (mu * mu) + 2.0 * b * i_cs / mu + c * i_cc;
    Matrix2::new(2.0 * pp, 2.0 * pq, 2.0 * pq, 2.0 * qq)
}

/// Adaptive Simpson evaluation of the smearing integral for any quadratic
/// Hamiltonian of one canonical pair.
pub fn smearing_by_quadrature(
    h: &QuadraticHamiltonian,
    d: &DiffusionMatrix,
    t: f64,
    direction: Direction,
) -> Result<Matrix2<f64>> {
    check_time(t)?;
    require_single_pair(h)?;
    let dm = d.matrix();
    let sign = direction.sign();
    let f = |s: f64| {
        let j = linalg::to_matrix2(&flow_jacobian(h, sign * s).expect("finite time").matrix);
        let m = j * dm * j.transpose();
        vec![m[(0, 0)], m[(0, 1)], m[(1, 1)]]
    };
    let v = quad::adaptive_simpson_vec(f, 0.0, t, 3, 1e-10, 1e-14);
    Ok(Matrix2::new(2.0 * v[0], 2.0 * v[1], 2.0 * v[1], 2.0 * v[2]))
}

/// Symplectic Fourier transform `P̃_t` of the smearing measure:
/// `P̃_t(x) = exp(ħ⁻² ∫₀ᵗ (C(J_{−s}^♯ x) − C(0,0)) ds)`.
#[derive(Debug, Clone)]
pub struct CharacteristicFn {
    h: QuadraticHamiltonian,
    spec: CovarianceSpec,
    t: f64,
    hbar: f64,
    /// Gauss–Legendre nodes `(weight, J_{−s}^♯)` for bulk evaluation.
    rule: Vec<(f64, Matrix2<f64>)>,
}

impl CharacteristicFn {
    /// Prepares `P̃_t` for arguments of size up to `radius`.
    pub fn new(h: &QuadraticHamiltonian, spec: &CovarianceSpec, t: f64, radius: f64) -> Result<Self> {
        check_time(t)?;
        require_single_pair(h)?;
        spec.validate()?;
        let hbar = h.hbar();
        if hbar <= 0.0 {
            return Err(Error::InvalidParameter("characteristic function needs hbar > 0".into()));
        }
        if let CovarianceSpec::Spectral { hbar: hs, .. } = *spec {
            if (hs - hbar).abs() > 1e-15 * hbar.max(hs) {
                return Err(Error::HbarMismatch(hs, hbar));
            }
        }
        let adjoint = |s: f64| {
            let j = linalg::to_matrix2(&flow_jacobian(h, -s).expect("finite time").matrix);
            symplectic_adjoint(&j)
        };
        let mut rule = Vec::new();
        if t > 0.0 && !spec.is_constant() {
            // Bound the phase change of the integrand per panel.
            let growth = (0..=16)
                .map(|k| adjoint(t * k as f64 / 16.0).abs().max())
                .fold(1.0, f64::max);
            let inv_len = inverse_length(spec);
            let gen = linalg::max_abs(&h.generator());
            let panels = ((t * (radius.abs() * growth * inv_len * (1.0 + gen) + gen) * 2.0).ceil() as usize + 8).min(1 << 14);
            let (x, w) = quad::gauss_legendre(8);
            let width = t / panels as f64;
            for k in 0..panels {
                let a = k as f64 * width;
                for (xi, wi) in x.iter().zip(&w) {
                    let s = a + 0.5 * width * (xi + 1.0);
                    rule.push((0.5 * width * wi, adjoint(s)));
                }
            }
        }
        Ok(Self { h: h.clone(), spec: spec.clone(), t, hbar, rule })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// `ln P̃_t(p, q)` from the prepared quadrature rule.
    pub fn log_eval(&self, p: f64, q: f64) -> f64 {
        let c00 = self.spec.c00();
        let sum: f64 = self
            .rule
            .iter()
            .map(|(w, m)| {
                let x = m * nalgebra::Vector2::new(p, q);
                w * (self.spec.eval(x[0], x[1]) - c00)
            })
            .sum();
        sum / (self.hbar * self.hbar)
    }

    pub fn eval(&self, p: f64, q: f64) -> f64 {
        self.log_eval(p, q).exp()
    }

    /// `P̃_t(p, q)` by adaptive Simpson quadrature (relative tolerance 1e-8),
    /// independent of the prepared rule.
    pub fn eval_adaptive(&self, p: f64, q: f64) -> f64 {
        if self.t == 0.0 {
            return 1.0;
        }
        let c00 = self.spec.c00();
        let f = |s: f64| {
            let j = linalg::to_matrix2(&flow_jacobian(&self.h, -s).expect("finite time").matrix);
            let x = symplectic_adjoint(&j) * nalgebra::Vector2::new(p, q);
            self.spec.eval(x[0], x[1]) - c00
        };
        let integral = quad::adaptive_simpson(f, 0.0, self.t, 1e-8, 1e-14 * c00.max(1.0) * self.t);
        (integral / (self.hbar * self.hbar)).exp()
    }

    /// `ln` of the weight of the undisturbed part, `−t C(0,0)/ħ²`.
    pub fn log_decay_weight(&self) -> f64 {
        -self.t * self.spec.c00() / (self.hbar * self.hbar)
    }

    /// `Q̃_t = P̃_t − e^{−tC(0,0)/ħ²}`.
    pub fn q_tilde(&self, p: f64, q: f64) -> f64 {
        let a = self.log_decay_weight();
        let l = self.log_eval(p, q);
        // e^l − e^a computed as e^a (e^{l−a} − 1)
        a.exp() * (l - a).exp_m1()
    }

    /// Total mass of `Q_t`, `1 − e^{−tC(0,0)/ħ²}`.
    pub fn q_mass(&self) -> f64 {
        -self.log_decay_weight().exp_m1()
    }
}

fn inverse_length(spec: &CovarianceSpec) -> f64 {
    match *spec {
        CovarianceSpec::Gaussian { ell_p, ell_q, .. } => (1.0 / ell_p).max(1.0 / ell_q),
        CovarianceSpec::Constant { .. } => 0.0,
        CovarianceSpec::Spectral { ref atoms, hbar } => {
            atoms.iter().map(|a| a.p.abs().max(a.q.abs())).fold(0.0, f64::max) / hbar
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn close(a: &Matrix2<f64>, b: &Matrix2<f64>, tol: f64) -> bool {
        (a - b).abs().max() <= tol
    }

    #[test]
    fn free_observable_direction() {
        let h = QuadraticHamiltonian::free(1.0, 1.0).unwrap();
        let d = DiffusionMatrix::new(0.5, 0.0, 0.2).unwrap();
        let t = 1.7;
        let c = smearing_covariance(&h, &d, t, Direction::Observable).unwrap().matrix;
        assert!((c[(0, 0)] - 2.0 * t * 0.5).abs() < 1e-14);
        assert!((c[(1, 1)] - (2.0 * t * 0.2 + 2.0 / 3.0 * t.powi(3) * 0.5)).abs() < 1e-13);
    }

    #[test]
    fn harmonic_full_period() {
        let h = QuadraticHamiltonian::harmonic(1.0, 1.0, 1.0).unwrap();
        let d = DiffusionMatrix::new(0.5, 0.0, 0.0).unwrap();
        for dir in [Direction::State, Direction::Observable] {
            let c = smearing_covariance(&h, &d, 2.0 * PI, dir).unwrap().matrix;
            assert!(close(&c, &Matrix2::new(PI, 0.0, 0.0, PI), 1e-12), "{c}");
        }
    }

    #[test]
    fn zero_time() {
        let h = QuadraticHamiltonian::harmonic(1.0, 2.0, 1.0).unwrap();
        let d = DiffusionMatrix::new(0.5, 0.1, 0.3).unwrap();
        let c = smearing_covariance(&h, &d, 0.0, Direction::State).unwrap();
        assert_eq!(c.matrix, Matrix2::zeros());
        assert!(matches!(smearing_covariance(&h, &d, -1.0, Direction::State), Err(Error::NegativeTime(_))));
    }

    #[test]
    fn closed_forms_match_quadrature() {
        let d = DiffusionMatrix::new(0.7, 0.4, 0.3).unwrap();
        for h in [
            QuadraticHamiltonian::free(1.5, 1.0).unwrap(),
            QuadraticHamiltonian::harmonic(0.8, 1.3, 1.0).unwrap(),
        ] {
            for dir in [Direction::State, Direction::Observable] {
                for &t in &[0.3, 2.0, 7.5] {
                    let a = smearing_covariance(&h, &d, t, dir).unwrap().matrix;
                    let b = smearing_by_quadrature(&h, &d, t, dir).unwrap();
                    let scale = a.abs().max().max(1.0);
                    assert!(close(&a, &b, 1e-8 * scale), "{dir:?} t={t}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn directions_related_by_flow() {
        let h = QuadraticHamiltonian::one_dof(0.8, 0.3, 1.1, 1.0).unwrap();
        let d = DiffusionMatrix::new(0.5, 0.2, 0.1).unwrap();
        let t = 1.4;
        let state = smearing_covariance(&h, &d, t, Direction::State).unwrap().matrix;
        let obs = smearing_covariance(&h, &d, t, Direction::Observable).unwrap().matrix;
        let j = linalg::to_matrix2(&flow_jacobian(&h, t).unwrap().matrix);
        assert!(close(&(j * state * j.transpose()), &obs, 1e-9));
    }

    #[test]
    fn characteristic_basics() {
        let h = QuadraticHamiltonian::free(1.0, 1.0).unwrap();
        let spec = CovarianceSpec::gaussian_q(1.0, 1.0).unwrap();
        let phi = CharacteristicFn::new(&h, &spec, 1.0, 10.0).unwrap();
        assert_eq!(phi.eval(0.0, 0.0), 1.0);
        assert!((phi.q_mass() - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!((phi.q_mass() - 0.63212).abs() < 1e-5);
        assert!((phi.q_tilde(0.0, 0.0) - phi.q_mass()).abs() < 1e-15);
        let constant = CovarianceSpec::constant(2.0).unwrap();
        let phi = CharacteristicFn::new(&h, &constant, 3.0, 10.0).unwrap();
        assert_eq!(phi.eval(1.5, -4.0), 1.0);
    }

    #[test]
    fn isotropic_harmonic_closed_form() {
        // rotations leave an isotropic Gaussian covariance invariant
        let h = QuadraticHamiltonian::harmonic(1.0, 1.0, 1.0).unwrap();
        let spec = CovarianceSpec::gaussian(1.0, 1.0, 1.0).unwrap();
        let t = 1.3;
        let phi = CharacteristicFn::new(&h, &spec, t, 6.0).unwrap();
        for &(p, q) in &[(0.5, 0.1), (2.0, -1.0), (-3.0, 4.0)] {
            let r2: f64 = p * p + q * q;
            let expected = (t * ((-0.5 * r2).exp() - 1.0)).exp();
            assert!((phi.eval(p, q) - expected).abs() < 1e-13);
        }
    }

    #[test]
    fn small_argument_matches_smearing_covariance() {
        let h = QuadraticHamiltonian::one_dof(1.0, 0.2, 0.5, 1.0).unwrap();
        let spec = CovarianceSpec::gaussian(1.0, 2.0, 1.5).unwrap();
        let t = 1.1;
        let phi = CharacteristicFn::new(&h, &spec, t, 1.0).unwrap();
        let c = smearing_covariance(&h, &spec.diffusion_matrix(), t, Direction::State).unwrap().matrix;
        // P̃(ħk_q, −ħk_p) ≈ exp(−½ kᵀ C_t k) for small k
        let eps = 1e-3;
        for &(kp, kq) in &[(1.0, 0.0), (0.0, 1.0), (0.6, -0.8)] {
            let k = nalgebra::Vector2::new(kp * eps, kq * eps);
            let expected = -0.5 * (k.transpose() * c * k)[(0, 0)];
            let got = phi.log_eval(k[1], -k[0]);
            assert!((got - expected).abs() < 1e-6 * expected.abs(), "{got} vs {expected}");
        }
    }

    proptest! {
        #[test]
        fn bounded_and_rule_accurate(p in -6.0f64..6.0, q in -6.0f64..6.0, t in 0.0f64..3.0) {
            let h = QuadraticHamiltonian::free(1.0, 1.0).unwrap();
            let spec = CovarianceSpec::gaussian(1.0, 1.5, 1.0).unwrap();
            let phi = CharacteristicFn::new(&h, &spec, t, 8.5).unwrap();
            let v = phi.eval(p, q);
            prop_assert!(v > 0.0 && v <= 1.0);
            prop_assert!((v - phi.eval_adaptive(p, q)).abs() <= 1e-8);
        }

        #[test]
        fn smearing_monotone(t1 in 0.0f64..5.0, dt in 0.0f64..5.0) {
            let h = QuadraticHamiltonian::one_dof(1.0, 0.3, 0.7, 1.0).unwrap();
            let d = DiffusionMatrix::new(0.5, 0.1, 0.2).unwrap();
            let a = smearing_covariance(&h, &d, t1, Direction::State).unwrap().matrix;
            let b = smearing_covariance(&h, &d, t1 + dt, Direction::State).unwrap().matrix;
            let scale = b.abs().max().max(1.0);
            prop_assert!(linalg::min_eigenvalue_2(&(b - a)) >= -1e-10 * scale);
        }
    }
}
