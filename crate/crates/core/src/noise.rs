//! Covariance functions of the homogeneous Gaussian white-noise field,
//! their curvature at the origin, positivity checks and field sampling.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::Matrix2;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// One atom `(p, q, weight)` of a discrete spectral measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralAtom {
    pub p: f64,
    pub q: f64,
    pub weight: f64,
}

/// Covariance `C(p, q)` of the noise field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CovarianceSpec {
    /// `C₀ exp(−p²/2ℓ_p² − q²/2ℓ_q²)`; an infinite length (written as
    /// `null` in JSON) drops the corresponding variable.
    Gaussian {
        c0: f64,
        #[serde(with = "infinite_as_null")]
        ell_p: f64,
        #[serde(with = "infinite_as_null")]
        ell_q: f64,
    },
    Constant { c0: f64 },
    /// `Σ w cos((p q_a − q p_a)/ħ)`.
    Spectral { atoms: Vec<SpectralAtom>, hbar: f64 },
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_none()
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl CovarianceSpec {
    pub fn gaussian(c0: f64, ell_p: f64, ell_q: f64) -> Result<Self> {
        let s = Self::Gaussian { c0, ell_p, ell_q };
        s.validate()?;
        Ok(s)
    }

    /// Position-only Gaussian covariance, `C₀ exp(−q²/2ℓ²)`.
    pub fn gaussian_q(c0: f64, ell_q: f64) -> Result<Self> {
        Self::gaussian(c0, f64::INFINITY, ell_q)
    }

    pub fn constant(c0: f64) -> Result<Self> {
        let s = Self::Constant { c0 };
        s.validate()?;
        Ok(s)
    }

    pub fn spectral(atoms: Vec<SpectralAtom>, hbar: f64) -> Result<Self> {
        let s = Self::Spectral { atoms, hbar };
        s.validate()?;
        Ok(s)
    }

    /// Reads a JSON array of `{p, q, weight}` atoms.
    pub fn spectral_from_json(json: &str, hbar: f64) -> Result<Self> {
        let atoms: Vec<SpectralAtom> = serde_json::from_str(json)?;
        Self::spectral(atoms, hbar)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match *self {
            Self::Gaussian { c0, ell_p, ell_q } => {
                if !(c0 >= 0.0 && c0.is_finite()) {
                    return bad(format!("amplitude must be finite and >= 0, got {c0}"));
                }
                for (name, l) in [("ell_p", ell_p), ("ell_q", ell_q)] {
                    if !(l > 0.0) || l.is_nan() {
                        return bad(format!("{name} must be positive, got {l}"));
                    }
                }
            }
            Self::Constant { c0 } => {
                if !(c0 >= 0.0 && c0.is_finite()) {
                    return bad(format!("amplitude must be finite and >= 0, got {c0}"));
                }
            }
            Self::Spectral { ref atoms, hbar } => {
                if !(hbar > 0.0 && hbar.is_finite()) {
                    return bad(format!("spectral covariance needs hbar > 0, got {hbar}"));
                }
                for a in atoms {
                    if !(a.weight >= 0.0) || !a.weight.is_finite() || !a.p.is_finite() || !a.q.is_finite() {
                        return bad(format!("invalid spectral atom {a:?}"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, p: f64, q: f64) -> f64 {
        match *self {
            Self::Gaussian { c0, ell_p, ell_q } => {
                let mut e = 0.0;
                if ell_p.is_finite() {
                    e += p * p / (2.0 * ell_p * ell_p);
                }
                if ell_q.is_finite() {
                    e += q * q / (2.0 * ell_q * ell_q);
                }
                c0 * (-e).exp()
            }
            Self::Constant { c0 } => c0,
            Self::Spectral { ref atoms, hbar } => atoms
                .iter()
                .map(|a| a.weight * ((p * a.q - q * a.p) / hbar).cos())
                .sum(),
        }
    }

    /// `C(0, 0)`.
    pub fn c00(&self) -> f64 {
        self.eval(0.0, 0.0)
    }

    /// Whether `C` does not depend on `p`.
    pub fn is_position_only(&self) -> bool {
        match *self {
            Self::Gaussian { c0, ell_p, .. } => c0 == 0.0 || ell_p.is_infinite(),
            Self::Constant { .. } => true,
            Self::Spectral { ref atoms, .. } => atoms.iter().all(|a| a.q == 0.0 || a.weight == 0.0),
        }
    }

    pub fn is_constant(&self) -> bool {
        match *self {
            Self::Gaussian { c0, ell_p, ell_q } => c0 == 0.0 || (ell_p.is_infinite() && ell_q.is_infinite()),
            Self::Constant { .. } => true,
            Self::Spectral { ref atoms, .. } => atoms.iter().all(|a| (a.p == 0.0 && a.q == 0.0) || a.weight == 0.0),
        }
    }

    /// `D_{μ,ν} = ((−i∂_p)^μ (i∂_q)^ν C)(0, 0) / (μ! ν!)`.
    pub fn curvature_coefficient(&self, mu: u32, nu: u32) -> f64 {
        if (mu + nu) % 2 == 1 {
            return 0.0;
        }
        match *self {
            Self::Gaussian { c0, ell_p, ell_q } => {
                if mu % 2 == 1 {
                    return 0.0;
                }
                c0 * gaussian_factor(mu / 2, ell_p) * gaussian_factor(nu / 2, ell_q)
            }
            Self::Constant { c0 } => {
                if mu == 0 && nu == 0 {
                    c0
                } else {
                    0.0
                }
            }
            Self::Spectral { ref atoms, hbar } => {
                let norm = factorial(mu) * factorial(nu);
                atoms
                    .iter()
                    .map(|a| a.weight * (a.q / hbar).powi(mu as i32) * (a.p / hbar).powi(nu as i32))
                    .sum::<f64>()
                    / norm
            }
        }
    }

    /// All coefficients `D_{μ,ν}` with `μ + ν ≤ max_order`.
    pub fn curvature_table(&self, max_order: u32) -> CurvatureTable {
        let mut t = CurvatureTable::default();
        for mu in 0..=max_order {
            for nu in 0..=(max_order - mu) {
                let v = self.curvature_coefficient(mu, nu);
                if v != 0.0 {
                    t.set(mu, nu, v);
                }
            }
        }
        t
    }

    pub fn diffusion_matrix(&self) -> DiffusionMatrix {
        DiffusionMatrix {
            d02: self.curvature_coefficient(0, 2),
            d11: self.curvature_coefficient(1, 1),
            d20: self.curvature_coefficient(2, 0),
        }
    }

    /// `(−∂_q² C)(0)`, the white-noise force strength for position-only noise.
    pub fn force_strength(&self) -> f64 {
        2.0 * self.curvature_coefficient(0, 2)
    }

    /// `∫∫ |C| dp dq`, infinite unless both lengths are finite.
    pub fn abs_integral(&self) -> f64 {
        match *self {
            Self::Gaussian { c0, ell_p, ell_q } => {
                if c0 == 0.0 {
                    0.0
                } else {
                    c0 * 2.0 * PI * ell_p * ell_q
                }
            }
            Self::Constant { c0 } => {
                if c0 == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Self::Spectral { ref atoms, .. } => {
                if atoms.iter().all(|a| a.weight == 0.0) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }
}

// (2a)!/(2^a a! ℓ^{2a}) / (2a)!
fn gaussian_factor(a: u32, ell: f64) -> f64 {
    if a == 0 {
        return 1.0;
    }
    if ell.is_infinite() {
        return 0.0;
    }
    1.0 / (2f64.powi(a as i32) * factorial(a) * ell.powi(2 * a as i32))
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Table of curvature coefficients `D_{μ,ν}`; missing entries are zero.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CurvatureTable {
    entries: BTreeMap<(u32, u32), f64>,
}

impl CurvatureTable {
    pub fn get(&self, mu: u32, nu: u32) -> f64 {
        self.entries.get(&(mu, nu)).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, mu: u32, nu: u32, value: f64) {
        self.entries.insert((mu, nu), value);
    }

    pub fn with(mut self, mu: u32, nu: u32, value: f64) -> Self {
        self.set(mu, nu, value);
        self
    }

    pub fn diffusion_matrix(&self) -> DiffusionMatrix {
        DiffusionMatrix { d02: self.get(0, 2), d11: self.get(1, 1), d20: self.get(2, 0) }
    }
}

/// Diffusion matrix `[[D₀₂, D₁₁/2], [D₁₁/2, D₂₀]]` in `(p, q)` ordering.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DiffusionMatrix {
    pub d02: f64,
    pub d11: f64,
    pub d20: f64,
}

impl DiffusionMatrix {
    pub fn new(d02: f64, d11: f64, d20: f64) -> Result<Self> {
        let d = Self { d02, d11, d20 };
        if [d02, d11, d20].iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite diffusion coefficient".into()));
        }
        let scale = d02.abs().max(d20.abs()).max(d11.abs()).max(f64::MIN_POSITIVE);
        if d.min_eigenvalue() < -1e-12 * scale {
            return Err(Error::InvalidParameter(format!(
                "diffusion matrix is not positive semidefinite (min eigenvalue {:e})",
                d.min_eigenvalue()
            )));
        }
        Ok(d)
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.d02, 0.5 * self.d11, 0.5 * self.d11, self.d20)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::min_eigenvalue_2(&self.matrix())
    }

    pub fn is_zero(&self) -> bool {
        self.d02 == 0.0 && self.d11 == 0.0 && self.d20 == 0.0
    }
}

/// Outcome of a positive-type check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositivityReport {
    /// Smallest spectral weight found.
    pub min_weight: f64,
    pub tolerance: f64,
}

/// Checks that `C` is the Fourier transform of a positive measure.
///
/// Gaussian covariances are sampled on a symmetric grid of `samples` points
/// per finite direction and transformed; the constant and atomic families
/// are positive by construction, and their report holds the smallest weight.
pub fn validate_positive_type(spec: &CovarianceSpec, samples: usize) -> Result<PositivityReport> {
    spec.validate()?;
    let c00 = spec.c00();
    let tolerance = 1e-8 * c00;
    match *spec {
        CovarianceSpec::Gaussian { ell_p, ell_q, .. } => {
            let half = |l: f64| if l.is_finite() { 12.0 * l } else { 0.0 };
            let (hp, hq) = (half(ell_p), half(ell_q));
            let np = if ell_p.is_finite() { samples } else { 1 };
            let nq = if ell_q.is_finite() { samples } else { 1 };
            check_sampled(|p, q| spec.eval(p, q), hp, hq, np, nq, c00)
        }
        CovarianceSpec::Constant { c0 } => Ok(PositivityReport { min_weight: c0, tolerance }),
        CovarianceSpec::Spectral { ref atoms, .. } => {
            let min_weight = atoms.iter().map(|a| a.weight).fold(c00, f64::min);
            Ok(PositivityReport { min_weight, tolerance })
        }
    }
}

/// Positive-type check of an arbitrary even function sampled on
/// `[−half_p, half_p) × [−half_q, half_q)` with `np × nq` points. A size of
/// one in a direction treats the function as constant along it.
pub fn validate_positive_type_fn<F: Fn(f64, f64) -> f64>(
    f: F,
    half_p: f64,
    half_q: f64,
    np: usize,
    nq: usize,
) -> Result<PositivityReport> {
    let c00 = f(0.0, 0.0);
    check_sampled(f, half_p, half_q, np, nq, c00)
}

fn check_sampled<F: Fn(f64, f64) -> f64>(
    f: F,
    half_p: f64,
    half_q: f64,
    np: usize,
    nq: usize,
    c00: f64,
) -> Result<PositivityReport> {
    if np == 0 || nq == 0 {
        return Err(Error::InvalidParameter("positive-type check needs at least one sample".into()));
    }
    let tolerance = 1e-8 * c00.abs();
    // sample point for wrapped index i: (i < n/2 ? i : i - n) * h
    let coord = |i: usize, n: usize, half: f64| {
        if n == 1 {
            0.0
        } else {
            let h = 2.0 * half / n as f64;
            let k = if i < n.div_ceil(2) { i as f64 } else { i as f64 - n as f64 };
            k * h
        }
    };
    let mut data: Vec<Complex64> = Vec::with_capacity(np * nq);
    for i in 0..np {
        let p = coord(i, np, half_p);
        for j in 0..nq {
            data.push(Complex64::new(f(p, coord(j, nq, half_q)), 0.0));
        }
    }
    fft2(&mut data, np, nq, false);
    let norm = (np * nq) as f64;
    let min_weight = data.iter().map(|c| c.re / norm).fold(f64::INFINITY, f64::min);
    if min_weight < -tolerance {
        return Err(Error::NotPositiveType { min: min_weight, tol: tolerance });
    }
    Ok(PositivityReport { min_weight, tolerance })
}

/// In-place 2-D FFT of a row-major `rows × cols` array.
pub(crate) fn fft2(data: &mut [Complex64], rows: usize, cols: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let row_fft = if inverse { planner.plan_fft_inverse(cols) } else { planner.plan_fft_forward(cols) };
    let col_fft = if inverse { planner.plan_fft_inverse(rows) } else { planner.plan_fft_forward(rows) };
    if cols > 1 {
        for row in data.chunks_mut(cols) {
            row_fft.process(row);
        }
    }
    if rows > 1 {
        let mut col = vec![Complex64::default(); rows];
        for j in 0..cols {
            for i in 0..rows {
                col[i] = data[i * cols + j];
            }
            col_fft.process(&mut col);
            for i in 0..rows {
                data[i * cols + j] = col[i];
            }
        }
    }
}

/// Spectral sampler for the force `−∂_q N` of position-only noise.
///
/// The field is a finite sum of cosine and sine modes `k_i` with weights
/// `S_i` summing to `C(0)`; the force increment over `dt` has covariance
/// `Σ S_i k_i² cos(k_i (q − q')) dt`.
#[derive(Debug, Clone)]
pub struct FieldSampler {
    wavenumbers: Vec<f64>,
    amplitudes: Vec<f64>,
}

impl FieldSampler {
    /// Builds the mode table. Gaussian covariances are discretised with
    /// `modes` midpoint wavenumbers on `[0, 8/ℓ_q]`; atomic ones are exact.
    pub fn new(spec: &CovarianceSpec, modes: usize) -> Result<Self> {
        spec.validate()?;
        if !spec.is_position_only() {
            return Err(Error::MomentumDependentNoise);
        }
        let (wavenumbers, weights): (Vec<f64>, Vec<f64>) = match *spec {
            CovarianceSpec::Gaussian { c0, ell_q, .. } if ell_q.is_finite() && c0 > 0.0 => {
                if modes == 0 {
                    return Err(Error::InvalidParameter("need at least one mode".into()));
                }
                let kmax = 8.0 / ell_q;
                let dk = kmax / modes as f64;
                let density = |k: f64| c0 * ell_q * (2.0 / PI).sqrt() * (-0.5 * (k * ell_q).powi(2)).exp();
                (0..modes)
                    .map(|i| {
                        let k = (i as f64 + 0.5) * dk;
                        (k, density(k) * dk)
                    })
                    .unzip()
            }
            CovarianceSpec::Spectral { ref atoms, hbar } => {
                atoms.iter().map(|a| ((a.p / hbar).abs(), a.weight)).unzip()
            }
            _ => (Vec::new(), Vec::new()),
        };
        let amplitudes = wavenumbers.iter().zip(&weights).map(|(k, w)| k * w.sqrt()).collect();
        Ok(Self { wavenumbers, amplitudes })
    }

    pub fn modes(&self) -> usize {
        self.wavenumbers.len()
    }

    /// Covariance of unit-time force increments at separation `dq`.
    pub fn force_covariance(&self, dq: f64) -> f64 {
        self.wavenumbers.iter().zip(&self.amplitudes).map(|(k, a)| a * a * (k * dq).cos()).sum()
    }

    /// Jointly Gaussian force increments at `positions` over a time step `dt`.
    pub fn sample_increment<R: Rng + ?Sized>(&self, rng: &mut R, positions: &[f64], dt: f64) -> Result<Vec<f64>> {
        if !(dt >= 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!("time step must be finite and >= 0, got {dt}")));
        }
        let mut out = vec![0.0; positions.len()];
        if dt == 0.0 {
            return Ok(out);
        }
        let s = dt.sqrt();
        for (k, a) in self.wavenumbers.iter().zip(&self.amplitudes) {
            let xi: f64 = rng.sample(StandardNormal);
            let eta: f64 = rng.sample(StandardNormal);
            for (o, &q) in out.iter_mut().zip(positions) {
                let (sn, cs) = (k * q).sin_cos();
                *o += s * a * (xi * sn - eta * cs);
            }
        }
        Ok(out)
    }
}
