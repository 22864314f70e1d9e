use nalgebra::{DMatrix, DVector, SymmetricEigen};

use serde::{Deserialize, Serialize};

use super::correlation::beta_eff;
use super::spectral::SpectralDensity;
use crate::error::{Error, Result};
use crate::phase_space::QuadraticHamiltonian;
use crate::quad;
use crate::semigroup::GaussianMoments;

/// System oscillator coupled to `n` bath oscillators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BathSpec {
    pub mass: f64,
    pub omega: f64,
    pub masses: Vec<f64>,
    pub frequencies: Vec<f64>,
}

impl BathSpec {
    pub fn new(mass: f64, omega: f64, masses: Vec<f64>, frequencies: Vec<f64>) -> Result<Self> {
        let s = Self { mass, omega, masses, frequencies };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(Error::InvalidParameter(format!("system mass must be positive, got {}", self.mass)));
        }
        if !(self.omega >= 0.0 && self.omega.is_finite()) {
            return Err(Error::InvalidParameter(format!("system frequency must be non-negative, got {}", self.omega)));
        }
        if self.masses.len() != self.frequencies.len() {
            return Err(Error::Dimension(format!(
                "{} bath masses but {} frequencies",
                self.masses.len(),
                self.frequencies.len()
            )));
        }
        if let Some(m) = self.masses.iter().find(|&&m| !(m > 0.0 && m.is_finite())) {
            return Err(Error::InvalidParameter(format!("bath masses must be positive, got {m}")));
        }
        if self.frequencies.first().is_some_and(|&w| !(w > 0.0)) {
            return Err(Error::InvalidParameter("bath frequencies must be positive".into()));
        }
        if self.frequencies.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter("bath frequencies must be strictly increasing".into()));
        }
        Ok(())
    }

    /// Number of bath oscillators.
    pub fn n(&self) -> usize {
        self.masses.len()
    }

    /// `√(m_j/m)`.
    pub fn kappa(&self, j: usize) -> f64 {
        (self.masses[j] / self.mass).sqrt()
    }

    /// Diagonal mass matrix, system first.
    pub fn mass_matrix(&self) -> DMatrix<f64> {
        let mut d = vec![self.mass];
        d.extend_from_slice(&self.masses);
        DMatrix::from_diagonal(&DVector::from_vec(d))
    }

    /// Matrix of squared frequencies in mass-weighted coordinates.
    pub fn frequency_matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut o = DMatrix::zeros(n + 1, n + 1);
        o[(0, 0)] = self.omega * self.omega;
        for j in 0..n {
            let w2 = self.frequencies[j].powi(2);
            let k = self.kappa(j);
            o[(0, 0)] += k * k * w2;
            o[(0, j + 1)] = -k * w2;
            o[(j + 1, 0)] = -k * w2;
            o[(j + 1, j + 1)] = w2;
        }
        o
    }

    /// `(M, Ω²)`.
    pub fn build(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        (self.mass_matrix(), self.frequency_matrix())
    }

    /// Total Hamiltonian `½ p·M⁻¹p + ½ q·M^{1/2}Ω²M^{1/2}q` in (p-block, q-block) order.
    pub fn hamiltonian(&self, hbar: f64) -> Result<QuadraticHamiltonian> {
        let d = self.n() + 1;
        let m = self.mass_matrix();
        let o = self.frequency_matrix();
        let mut a = DMatrix::zeros(2 * d, 2 * d);
        for i in 0..d {
            a[(i, i)] = 1.0 / m[(i, i)];
            for k in 0..d {
                a[(d + i, d + k)] = m[(i, i)].sqrt() * o[(i, k)] * m[(k, k)].sqrt();
            }
        }
        QuadraticHamiltonian::new(a, hbar)
    }

    /// Normal modes of `Ω²` from the secular equation (`Ω²` is an arrowhead
    /// matrix, so eigenvectors follow from the eigenvalues in closed form).
    pub fn normal_modes(&self) -> NormalModes {
        let roots = self.secular_roots();
        let coupling: Vec<f64> = (0..self.n()).map(|j| self.kappa(j) * self.frequencies[j].powi(2)).collect();
        let poles: Vec<f64> = self.frequencies.iter().map(|w| w * w).collect();
        let mut v0 = Vec::with_capacity(roots.len());
        for r in &roots {
            v0.push(self.weight_at(r).sqrt());
        }
        NormalModes { roots, v0, coupling, poles }
    }

    /// `(G_n, Ġ_n)(s)` from a dense symmetric eigendecomposition of `Ω²`.
    pub fn green_eigen(&self, s: f64) -> [f64; 2] {
        if s <= 0.0 {
            return [0.0; 2];
        }
        let eig = SymmetricEigen::new(self.frequency_matrix());
        let mut g = [0.0; 2];
        for (k, &l) in eig.eigenvalues.iter().enumerate() {
            let w = eig.eigenvectors[(0, k)].powi(2);
            let r = l.max(0.0).sqrt();
            g[0] += w * sin_over(r, s);
            g[1] += w * (r * s).cos();
        }
        g
    }

    /// `Φ_{β,n}(t) = Σ m_jω_j² cos(ω_j t) / β_eff(ħω_j)`.
    pub fn force_correlation(&self, beta: f64, hbar: f64, t: f64) -> f64 {
        self.masses
            .iter()
            .zip(&self.frequencies)
            .map(|(&m, &w)| m * w * w / beta_eff(hbar * w, beta) * (w * t).cos())
            .sum()
    }

    /// Friction kernel `γ_n(t) = Σ m_jω_j² cos(ω_j t)`.
    pub fn friction_kernel(&self, t: f64) -> f64 {
        self.masses.iter().zip(&self.frequencies).map(|(&m, &w)| m * w * w * (w * t).cos()).sum()
    }

    /// Denominator of `Ĝ_n` as a function of `ξ = z²`,
    /// `ω² − ξ + Σ κ_j²ω_j² ξ/(ξ − ω_j²)`, at `ξ = base + offset`.
    fn secular(&self, r: &SecularRoot) -> f64 {
        let xi = r.value();
        let mut d = self.omega * self.omega - xi;
        for j in 0..self.n() {
            let w2 = self.frequencies[j].powi(2);
            d += self.masses[j] / self.mass * w2 * xi / r.gap_from(w2);
        }
        d
    }

    /// `−1/D′(ξ)`, the squared system component of the eigenvector.
    fn weight_at(&self, r: &SecularRoot) -> f64 {
        let mut d = 1.0;
        for j in 0..self.n() {
            let w2 = self.frequencies[j].powi(2);
            d += self.masses[j] / self.mass * w2 * w2 / r.gap_from(w2).powi(2);
        }
        1.0 / d
    }

    /// Roots of the secular equation, one per interval between consecutive
    /// `ω_j²`, each stored relative to its nearer endpoint.
    fn secular_roots(&self) -> Vec<SecularRoot> {
        let n = self.n();
        let poles: Vec<f64> = self.frequencies.iter().map(|w| w * w).collect();
        let total: f64 = self.omega.powi(2) + (0..n).map(|j| self.masses[j] / self.mass * poles[j]).sum::<f64>();
        let mut out = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let lo = if k == 0 { 0.0 } else { poles[k - 1] };
            let hi = if k == n { total + poles.last().copied().unwrap_or(0.0) + 1.0 } else { poles[k] };
            if k == 0 && self.omega == 0.0 {
                out.push(SecularRoot { base: 0.0, offset: 0.0 });
                continue;
            }
            // D decreases across the interval; pick the half holding the root
            let half = 0.5 * (hi - lo);
            let mid = SecularRoot { base: lo, offset: half };
            let (base, mut a, mut b) = if k < n && self.secular(&mid) < 0.0 {
                (lo, 0.0, half)
            } else if k < n {
                (hi, -half, 0.0)
            } else {
                (lo, 0.0, hi - lo)
            };
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if m <= a || m >= b {
                    break;
                }
                if self.secular(&SecularRoot { base, offset: m }) > 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            out.push(SecularRoot { base, offset: 0.5 * (a + b) });
        }
        out
    }

    /// Poles `λ_k` of `Ĝ_n` in `ξ = z²` and weights `w_k` of the partial
    /// fractions `Ĝ_n(z) = Σ w_k/(λ_k − z²)`.
    pub fn partial_fractions(&self) -> Vec<(f64, f64)> {
        self.secular_roots().iter().map(|r| (r.value(), self.weight_at(r))).collect()
    }

    /// `G_n(s)` by partial-fraction inversion; zero for `s ≤ 0`.
    pub fn green_partial_fraction(&self, s: f64) -> [f64; 2] {
        if s <= 0.0 {
            return [0.0; 2];
        }
        let mut g = [0.0; 2];
        for (l, w) in self.partial_fractions() {
            let r = l.sqrt();
            g[0] += w * sin_over(r, s);
            g[1] += w * (r * s).cos();
        }
        g
    }

    /// Residual between the dense eigendecomposition and the
    /// partial-fraction routes to `(G_n, Ġ_n)(s)`; both vanish for `s ≤ 0`.
    pub fn gn_identity_check(&self, s: f64) -> f64 {
        let pf = self.green_partial_fraction(s);
        let eig = self.green_eigen(s);
        (pf[0] - eig[0]).abs().max((pf[1] - eig[1]).abs())
    }
}

/// Eigenvalue `base + offset` of `Ω²`, kept relative to a nearby pole so that
/// gaps to that pole carry full precision.
#[derive(Debug, Clone, Copy, PartialEq)]
struct SecularRoot {
    base: f64,
    offset: f64,
}

impl SecularRoot {
    fn value(&self) -> f64 {
        self.base + self.offset
    }

    /// `value − pole`.
    fn gap_from(&self, pole: f64) -> f64 {
        (self.base - pole) + self.offset
    }
}

fn sin_over(r: f64, s: f64) -> f64 {
    if r * s < 1e-8 {
        s * (1.0 - (r * s).powi(2) / 6.0)
    } else {
        (r * s).sin() / r
    }
}

/// Normal modes of `Ω²`.
#[derive(Debug, Clone)]
pub struct NormalModes {
    roots: Vec<SecularRoot>,
    v0: Vec<f64>,
    coupling: Vec<f64>,
    poles: Vec<f64>,
}

/// `(cos Ωs)_{00}`, `(sin Ωs/Ω)_{00}` and `−(Ω sin Ωs)_{00}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemFunctions {
    pub cos: f64,
    pub sin_over: f64,
    pub neg_omega_sin: f64,
}

impl NormalModes {
    /// Mode frequencies `√λ_k`.
    pub fn frequencies(&self) -> Vec<f64> {
        self.roots.iter().map(|r| r.value().max(0.0).sqrt()).collect()
    }

    /// Eigenvector component `V_{lk}` (`l = 0` is the system).
    pub fn component(&self, l: usize, k: usize) -> f64 {
        if l == 0 {
            self.v0[k]
        } else {
            // (Ω² − λ)v = 0 on bath row l
            -self.coupling[l - 1] * self.v0[k] / self.roots[k].gap_from(self.poles[l - 1])
        }
    }

    pub fn system_functions(&self, s: f64) -> SystemFunctions {
        let mut out = SystemFunctions { cos: 0.0, sin_over: 0.0, neg_omega_sin: 0.0 };
        for (k, r) in self.frequencies().into_iter().enumerate() {
            let w = self.v0[k].powi(2);
            out.cos += w * (r * s).cos();
            out.sin_over += w * sin_over(r, s);
            out.neg_omega_sin -= w * r * (r * s).sin();
        }
        out
    }

    /// `f(Ω)_{0l}` for all `l`.
    pub fn system_row(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        let d = self.roots.len();
        let fk: Vec<f64> = self.frequencies().into_iter().map(f).collect();
        (0..d).map(|l| (0..d).map(|k| self.v0[k] * fk[k] * self.component(l, k)).sum()).collect()
    }

    /// `∫₀ᵗ c(s)² ds` where `c = (cos Ωs)_{00}`, or `(sin Ωs/Ω)_{00}` when
    /// `sine` is set.
    fn square_integral(&self, t: f64, sine: bool) -> f64 {
        let freqs = self.frequencies();
        let d = freqs.len();
        let w: Vec<f64> = self.v0.iter().map(|v| v * v).collect();
        let mut acc = 0.0;
        for k in 0..d {
            for l in k..d {
                let (a, b) = (freqs[k], freqs[l]);
                let v = if sine { sin_sin_integral(a, b, t) } else { cos_cos_integral(a, b, t) };
                acc += if k == l { 1.0 } else { 2.0 } * w[k] * w[l] * v;
            }
        }
        acc
    }
}

/// `∫₀ᵗ sin(xt)/x` style helper: `sin(xt)/x` with the `x → 0` limit `t`.
fn sinc_t(x: f64, t: f64) -> f64 {
    if (x * t).abs() < 1e-6 {
        t * (1.0 - (x * t).powi(2) / 6.0)
    } else {
        (x * t).sin() / x
    }
}

/// `∫₀ᵗ cos(as) cos(bs) ds`.
fn cos_cos_integral(a: f64, b: f64, t: f64) -> f64 {
    0.5 * (sinc_t(a - b, t) + sinc_t(a + b, t))
}

/// `∫₀ᵗ (sin(as)/a)(sin(bs)/b) ds`, with `sin(xs)/x → s` at `x = 0`.
fn sin_sin_integral(a: f64, b: f64, t: f64) -> f64 {
    let small = |x: f64| x * t < 1e-4;
    match (small(a), small(b)) {
        (true, true) => t.powi(3) / 3.0,
        (true, false) | (false, true) => {
            // ∫ s sin(cs)/c ds
            let c = if small(a) { b } else { a };
            ((c * t).sin() - c * t * (c * t).cos()) / (c * c * c)
        }
        (false, false) => 0.5 * (sinc_t(a - b, t) - sinc_t(a + b, t)) / (a * b),
    }
}

/// Exact second moments of the system coordinates under the total
/// Hamiltonian plus the random force field, with the bath started in its
/// β_eff-weighted equilibrium state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteNMoments {
    pub t: f64,
    pub p2: f64,
    pub q2: f64,
    /// Noise contribution `(−∂_q²C)(0) ∫₀ᵗ (cos Ωs)_{00}² ds` to `⟨p²⟩`.
    pub p2_noise: f64,
    /// Noise contribution `(−∂_q²C)(0) ∫₀ᵗ (G_n(s)/m)² ds` to `⟨q²⟩`.
    pub q2_noise: f64,
    /// `(sin Ωt/Ω)_{00} = G_n(t)`.
    pub g: f64,
    /// `(cos Ωt)_{00} = Ġ_n(t)`.
    pub g_dot: f64,
}

/// Finite-bath moments at time `t`. `force_strength` is `(−∂_q²C)(0)`.
pub fn finite_n_moments(
    bath: &BathSpec,
    force_strength: f64,
    beta: f64,
    hbar: f64,
    initial: &GaussianMoments,
    t: f64,
) -> Result<FiniteNMoments> {
    bath.validate()?;
    crate::error::check_time(t)?;
    if !(force_strength >= 0.0) {
        return Err(Error::InvalidParameter(format!("force strength must be non-negative, got {force_strength}")));
    }
    let modes = bath.normal_modes();
    let d = bath.n() + 1;
    let mut masses = vec![bath.mass];
    masses.extend_from_slice(&bath.masses);
    let c = modes.system_row(|r| (r * t).cos());
    let s = modes.system_row(|r| sin_over(r, t));
    let ws = modes.system_row(|r| -r * (r * t).sin());
    let m = bath.mass;
    // q₀(t) = Σ_l [c_l √(m_l/m) q_l + s_l p_l /√(m m_l)]
    // p₀(t) = Σ_l [ws_l √(m m_l) q_l + c_l √(m/m_l) p_l]
    let raw = initial.raw_second();
    let (pp, pq, qq) = (raw[(0, 0)], raw[(0, 1)], raw[(1, 1)]);
    let (aq, ap) = (c[0], s[0] / m);
    let (bq, bp) = (ws[0] * m, c[0]);
    let mut q2 = aq * aq * qq + 2.0 * aq * ap * pq + ap * ap * pp;
    let mut p2 = bq * bq * qq + 2.0 * bq * bp * pq + bp * bp * pp;
    for l in 1..d {
        let ml = masses[l];
        let w = bath.frequencies[l - 1];
        let be = beta_eff(hbar * w, beta);
        let var_p = ml / be;
        let var_q = 1.0 / (ml * w * w * be);
        q2 += (c[l] * (ml / m).sqrt()).powi(2) * var_q + (s[l] / (m * ml).sqrt()).powi(2) * var_p;
        p2 += (ws[l] * (m * ml).sqrt()).powi(2) * var_q + (c[l] * (m / ml).sqrt()).powi(2) * var_p;
    }
    let p2_noise = force_strength * modes.square_integral(t, false);
    let q2_noise = force_strength * modes.square_integral(t, true) / (m * m);
    Ok(FiniteNMoments { t, p2: p2 + p2_noise, q2: q2 + q2_noise, p2_noise, q2_noise, g: s[0], g_dot: c[0] })
}

/// Bath cutoff used by [`discretize_bath`] when none is given: grows like `√n`
/// so both the truncated tail and the mode spacing shrink with `n`.
pub fn default_cutoff(spectral: &SpectralDensity, n: usize) -> f64 {
    2.0 * spectral.scale() * (n as f64).sqrt()
}

/// `n` bath modes at the midpoints of `[0, cutoff]` with
/// `m_jω_j² = 2∫_bin J`.
pub fn discretize_bath(spectral: &SpectralDensity, n: usize, cutoff: f64, mass: f64, omega: f64) -> Result<BathSpec> {
    spectral.check_assumptions()?;
    if !(cutoff > 0.0 && cutoff.is_finite()) {
        return Err(Error::InvalidParameter(format!("cutoff must be positive, got {cutoff}")));
    }
    let width = cutoff / n.max(1) as f64;
    let mut masses = Vec::with_capacity(n);
    let mut freqs = Vec::with_capacity(n);
    for j in 0..n {
        let a = j as f64 * width;
        let w = a + 0.5 * width;
        let weight = 2.0 * quad::gauss_kronrod(|x| spectral.eval(x), a, a + width, 1e-12, 0.0).0;
        masses.push(weight / (w * w));
        freqs.push(w);
    }
    BathSpec::new(mass, omega, masses, freqs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_bath(rng: &mut ChaCha8Rng, n: usize) -> BathSpec {
        let mut freqs: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..5.0)).collect();
        freqs.sort_by(f64::total_cmp);
        let masses = (0..n).map(|_| rng.random_range(0.05..2.0)).collect();
        BathSpec::new(rng.random_range(0.5..2.0), rng.random_range(0.0..2.0), masses, freqs).unwrap()
    }

    #[test]
    fn small_cases_by_hand() {
        let b = BathSpec::new(1.0, 1.5, vec![], vec![]).unwrap();
        assert_eq!(b.frequency_matrix()[(0, 0)], 2.25);
        let s = b.normal_modes().system_functions(0.7);
        assert!((b.normal_modes().frequencies()[0] - 1.5).abs() < 1e-14);
        assert!((s.sin_over - (1.5f64 * 0.7).sin() / 1.5).abs() < 1e-15);
        assert!(b.gn_identity_check(0.7) < 1e-12);

        let b = BathSpec::new(1.0, 0.0, vec![1.0], vec![1.0]).unwrap();
        let o = b.frequency_matrix();
        assert_eq!(o, DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
        let mut ev: Vec<f64> = SymmetricEigen::new(o).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert!(ev[0].abs() < 1e-14 && (ev[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn eigen_and_partial_fraction_routes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1, 2, 5, 12, 20] {
            let b = random_bath(&mut rng, n);
            for k in 0..=40 {
                let s = 0.25 * k as f64;
                let r = b.gn_identity_check(s);
                assert!(r < 1e-10, "n={n} s={s}: {r}");
            }
            assert_eq!(b.green_partial_fraction(-1.0), [0.0; 2]);
        }
    }

    #[test]
    fn secular_modes_match_dense_eigendecomposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = random_bath(&mut rng, 9);
        let modes = b.normal_modes();
        let eig = SymmetricEigen::new(b.frequency_matrix());
        let t = 1.7;
        let dense = |f: &dyn Fn(f64) -> f64| -> Vec<f64> {
            let fk: Vec<f64> = eig.eigenvalues.iter().map(|&l| f(l.max(0.0).sqrt())).collect();
            (0..=b.n())
                .map(|l| (0..=b.n()).map(|k| eig.eigenvectors[(0, k)] * fk[k] * eig.eigenvectors[(l, k)]).sum())
                .collect()
        };
        let a = modes.system_row(|r| (r * t).cos());
        let c = dense(&|r: f64| (r * t).cos());
        for (x, y) in a.iter().zip(&c) {
            assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
        // orthonormal columns
        for k in 0..=b.n() {
            let norm: f64 = (0..=b.n()).map(|l| modes.component(l, k).powi(2)).sum();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn drude_discretization_recovers_friction() {
        let j = SpectralDensity::drude(0.5, 1.0).unwrap();
        let b = discretize_bath(&j, 100_000, 1000.0, 1.0, 1.0).unwrap();
        let g0 = b.friction_kernel(0.0);
        assert!((g0 / j.gamma_zero() - 1.0).abs() < 1e-3);
        assert!((b.friction_kernel(1.0) / j.friction_kernel(1.0) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn finite_n_force_correlation_amplitude() {
        let b = BathSpec::new(1.0, 1.0, vec![1.0], vec![2.0]).unwrap();
        assert!((b.force_correlation(1.0, 1.0, 0.0) - 4.0 / 1f64.tanh()).abs() < 1e-12);
    }

    #[test]
    fn moments_match_phase_space_propagation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = random_bath(&mut rng, 4);
        let (beta, hbar, t) = (0.7, 0.4, 1.3);
        let init = GaussianMoments::new([0.3, -0.2], nalgebra::Matrix2::new(0.5, 0.1, 0.1, 0.8));
        let fm = finite_n_moments(&b, 0.0, beta, hbar, &init, t).unwrap();
        // oracle: the flow Jacobian of the total Hamiltonian
        let h = b.hamiltonian(hbar).unwrap();
        let jt = crate::phase_space::flow_jacobian(&h, t).unwrap();
        let d = b.n() + 1;
        let mut cov = DMatrix::zeros(2 * d, 2 * d);
        let raw = init.raw_second();
        cov[(0, 0)] = raw[(0, 0)];
        cov[(0, d)] = raw[(0, 1)];
        cov[(d, 0)] = raw[(1, 0)];
        cov[(d, d)] = raw[(1, 1)];
        for j in 0..b.n() {
            let be = beta_eff(hbar * b.frequencies[j], beta);
            cov[(j + 1, j + 1)] = b.masses[j] / be;
            cov[(d + j + 1, d + j + 1)] = 1.0 / (b.masses[j] * b.frequencies[j].powi(2) * be);
        }
        let out = &jt.matrix * cov * jt.matrix.transpose();
        assert!((out[(0, 0)] - fm.p2).abs() < 1e-10 * out[(0, 0)], "{} vs {}", out[(0, 0)], fm.p2);
        assert!((out[(d, d)] - fm.q2).abs() < 1e-10 * out[(d, d)]);
        assert!(finite_n_moments(&b, 0.0, beta, hbar, &init, 0.0).unwrap().p2 - raw[(0, 0)] < 1e-14);
    }

    #[test]
    fn noise_integrals_match_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut b = random_bath(&mut rng, 3);
        b.omega = 0.0;
        let init = GaussianMoments::point(0.0, 0.0);
        let t = 2.7;
        let fm = finite_n_moments(&b, 1.0, 1.0, 1.0, &init, t).unwrap();
        let modes = b.normal_modes();
        let qc = quad::gauss_kronrod(|s| modes.system_functions(s).cos.powi(2), 0.0, t, 1e-13, 0.0).0;
        let qs = quad::gauss_kronrod(|s| modes.system_functions(s).sin_over.powi(2), 0.0, t, 1e-13, 0.0).0;
        assert!((fm.p2_noise - qc).abs() < 1e-10);
        assert!((fm.q2_noise - qs / b.mass.powi(2)).abs() < 1e-10);
        let zero = finite_n_moments(&b, 1.0, 1.0, 1.0, &init, 0.0).unwrap();
        assert_eq!((zero.p2_noise, zero.q2_noise), (0.0, 0.0));
        let _ = PI;
    }
}
