use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;
use crate::special::dawson;

/// Spectral density `J(ν)` of the macroscopic bath, with friction kernel
/// `γ(t) = ∫ J(ν) e^{iνt} dν`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SpectralDensity {
    /// `J₀ ω₀² / (ν² + ω₀²)`
    Drude { j0: f64, omega0: f64 },
    /// `J₀ exp(−ν²/2ω₀²)`
    Gaussian { j0: f64, omega0: f64 },
    /// Samples on `ν ≥ 0` (or a symmetric range), linear in between and
    /// continued as `J_last (ν_last/ν)²` beyond the last sample.
    Tabulated {
        nu: Vec<f64>,
        #[serde(rename = "J")]
        j: Vec<f64>,
    },
}

impl SpectralDensity {
    pub fn drude(j0: f64, omega0: f64) -> Result<Self> {
        let s = Self::Drude { j0, omega0 };
        s.check_assumptions()?;
        Ok(s)
    }

    pub fn gaussian(j0: f64, omega0: f64) -> Result<Self> {
        let s = Self::Gaussian { j0, omega0 };
        s.check_assumptions()?;
        Ok(s)
    }

    /// Builds a tabulated density from samples; a symmetric table is folded
    /// onto `ν ≥ 0`.
    pub fn tabulated(nu: Vec<f64>, j: Vec<f64>) -> Result<Self> {
        if nu.len() != j.len() {
            return Err(Error::Dimension(format!("{} frequencies but {} values", nu.len(), j.len())));
        }
        let mut pairs: Vec<(f64, f64)> = Vec::new();
        for (&x, &y) in nu.iter().zip(&j) {
            if !x.is_finite() || !y.is_finite() {
                return Err(Error::AssumptionViolation("non-finite spectral density sample".into()));
            }
            if x < 0.0 {
                continue;
            }
            pairs.push((x, y));
        }
        // negative-frequency samples must mirror the positive ones
        for (&x, &y) in nu.iter().zip(&j) {
            if x < 0.0 {
                match pairs.iter().find(|(a, _)| (a + x).abs() <= 1e-12 * x.abs().max(1.0)) {
                    Some((_, b)) if (b - y).abs() <= 1e-9 * b.abs().max(y.abs()) => {}
                    _ => return Err(Error::AssumptionViolation(format!("J is not even at nu = {x}"))),
                }
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidParameter("duplicate frequency in tabulated density".into()));
        }
        let s = Self::Tabulated { nu: pairs.iter().map(|p| p.0).collect(), j: pairs.iter().map(|p| p.1).collect() };
        s.check_assumptions()?;
        Ok(s)
    }

    /// Reads `{"nu": [...], "J": [...]}`.
    pub fn tabulated_from_json(json: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Table {
            nu: Vec<f64>,
            #[serde(rename = "J")]
            j: Vec<f64>,
        }
        let t: Table = serde_json::from_str(json)?;
        Self::tabulated(t.nu, t.j)
    }

    /// Checks continuity data, evenness, strict positivity and the decay
    /// of `ν² J(ν)`. Constant (Ohmic) densities fail the decay check.
    pub fn check_assumptions(&self) -> Result<()> {
        let fail = |m: String| Err(Error::AssumptionViolation(m));
        match *self {
            Self::Drude { j0, omega0 } | Self::Gaussian { j0, omega0 } => {
                if !(j0 > 0.0 && j0.is_finite()) {
                    return fail(format!("J0 must be positive, got {j0}"));
                }
                if !(omega0 > 0.0 && omega0.is_finite()) {
                    return fail(format!("omega0 must be positive, got {omega0}"));
                }
            }
            Self::Tabulated { ref nu, ref j } => {
                if nu.len() < 4 {
                    return fail("tabulated density needs at least four samples".into());
                }
                if nu[0] != 0.0 {
                    return fail("tabulated density must include nu = 0".into());
                }
                if let Some(v) = j.iter().find(|&&v| !(v > 0.0)) {
                    return fail(format!("J must be strictly positive, found {v}"));
                }
                let n = nu.len();
                let tail: Vec<f64> = (3 * n / 4..n).map(|i| nu[i] * nu[i] * j[i]).collect();
                let (lo, hi) = tail.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
                if hi > 1.1 * lo && tail.last() > tail.first() {
                    return fail("nu^2 J(nu) does not settle in the tail of the table (Ohmic densities are excluded)".into());
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, nu: f64) -> f64 {
        match *self {
            Self::Drude { j0, omega0 } => j0 * omega0 * omega0 / (nu * nu + omega0 * omega0),
            Self::Gaussian { j0, omega0 } => j0 * (-nu * nu / (2.0 * omega0 * omega0)).exp(),
            Self::Tabulated { nu: ref xs, ref j } => {
                let x = nu.abs();
                let last = xs.len() - 1;
                if x >= xs[last] {
                    return j[last] * (xs[last] / x).powi(2);
                }
                let k = xs.partition_point(|&v| v <= x) - 1;
                let w = (x - xs[k]) / (xs[k + 1] - xs[k]);
                j[k] * (1.0 - w) + j[k + 1] * w
            }
        }
    }

    /// `J(0)`.
    pub fn j_zero(&self) -> f64 {
        self.eval(0.0)
    }

    /// `lim ν² J(ν)`.
    pub fn tail_limit(&self) -> f64 {
        match *self {
            Self::Drude { j0, omega0 } => j0 * omega0 * omega0,
            Self::Gaussian { .. } => 0.0,
            Self::Tabulated { ref nu, ref j } => {
                let last = nu.len() - 1;
                nu[last] * nu[last] * j[last]
            }
        }
    }

    /// `γ(0) = ∫ J(ν) dν` over the real line.
    pub fn gamma_zero(&self) -> f64 {
        match *self {
            Self::Drude { j0, omega0 } => PI * j0 * omega0,
            Self::Gaussian { j0, omega0 } => (2.0 * PI).sqrt() * j0 * omega0,
            Self::Tabulated { ref nu, ref j } => {
                let body: f64 = nu.windows(2).zip(j.windows(2)).map(|(x, y)| 0.5 * (y[0] + y[1]) * (x[1] - x[0])).sum();
                let last = nu.len() - 1;
                2.0 * (body + j[last] * nu[last])
            }
        }
    }

    /// Frequency beyond which `J` is negligible or in its algebraic tail.
    pub(crate) fn scale(&self) -> f64 {
        match *self {
            Self::Drude { omega0, .. } | Self::Gaussian { omega0, .. } => omega0,
            Self::Tabulated { ref nu, .. } => nu[nu.len() - 1],
        }
    }

    /// Friction kernel `γ(t) = 2∫₀^∞ J(ν) cos(νt) dν`.
    pub fn friction_kernel(&self, t: f64) -> f64 {
        match *self {
            Self::Drude { j0, omega0 } => PI * j0 * omega0 * (-omega0 * t.abs()).exp(),
            Self::Gaussian { j0, omega0 } => {
                (2.0 * PI).sqrt() * j0 * omega0 * (-0.5 * (omega0 * t).powi(2)).exp()
            }
            Self::Tabulated { .. } => {
                let f = |x: f64| 2.0 * self.eval(x) * (x * t).cos();
                let s = self.scale();
                quad::gauss_kronrod(f, 0.0, s, 1e-10, 1e-14).0
                    + quad::gauss_kronrod_semi_infinite(f, s, s, 1e-10, 1e-14).0
            }
        }
    }

    /// Laplace transform `γ̂(z) = i∫ J(ν)/(z − ν) dν` for `Im z > 0`, and its
    /// boundary value `πJ(ν) + i PV∫ J(ν')/(ν − ν') dν'` for real `z`.
    pub fn gamma_hat(&self, z: Complex64) -> Result<Complex64> {
        if z.im < 0.0 || !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::InvalidParameter(format!("gamma_hat needs Im z >= 0, got {z}")));
        }
        match *self {
            Self::Drude { j0, omega0 } => Ok(Complex64::i() * PI * j0 * omega0 / (z + Complex64::i() * omega0)),
            Self::Gaussian { j0, omega0 } => {
                let zeta = z / (2f64.sqrt() * omega0);
                if z.im == 0.0 {
                    let x = zeta.re;
                    Ok(Complex64::new(PI * j0 * (-x * x).exp(), 2.0 * PI.sqrt() * j0 * dawson(x)))
                } else {
                    Ok(PI * j0 * faddeeva(zeta))
                }
            }
            Self::Tabulated { .. } => {
                if z.im == 0.0 {
                    Ok(Complex64::new(PI * self.eval(z.re), self.hilbert(z.re)?))
                } else {
                    Ok(self.gamma_hat_numeric(z))
                }
            }
        }
    }

    /// `PV∫ J(ν')/(ν − ν') dν'`.
    pub fn hilbert(&self, nu: f64) -> Result<f64> {
        match *self {
            Self::Drude { j0, omega0 } => Ok(PI * j0 * omega0 * nu / (nu * nu + omega0 * omega0)),
            Self::Gaussian { j0, omega0 } => Ok(2.0 * PI.sqrt() * j0 * dawson(nu / (2f64.sqrt() * omega0))),
            Self::Tabulated { .. } => self.hilbert_numeric(nu),
        }
    }

    /// Symmetric-pair quadrature `∫₀^∞ (J(ν−u) − J(ν+u))/u du`.
    pub(crate) fn hilbert_numeric(&self, nu: f64) -> Result<f64> {
        let f = |u: f64| {
            if u == 0.0 {
                0.0
            } else {
                (self.eval(nu - u) - self.eval(nu + u)) / u
            }
        };
        let s = self.scale();
        let split = nu.abs() + s;
        let tol = 1e-10 * self.j_zero();
        let (a, ea) = quad::gauss_kronrod(f, 0.0, split, 1e-10, tol);
        let (b, eb) = quad::gauss_kronrod_semi_infinite(f, split, split, 1e-10, tol);
        let value = a + b;
        if !value.is_finite() || ea + eb > 1e-6 * (value.abs() + self.j_zero()) {
            return Err(Error::PvDivergence(nu));
        }
        Ok(value)
    }

    /// Direct quadrature of `∫ J(ν) (y + i(x − ν)) / ((x − ν)² + y²) dν`.
    pub(crate) fn gamma_hat_numeric(&self, z: Complex64) -> Complex64 {
        let (x, y) = (z.re, z.im);
        let s = self.scale();
        let integrate = |g: &dyn Fn(f64) -> f64| {
            // the kernel is concentrated near ν = x with width y
            let lo = x - 40.0 * y - s;
            let hi = x + 40.0 * y + s;
            let lo = lo.min(-s);
            let hi = hi.max(s);
            let mid = quad::gauss_kronrod(g, lo, hi, 1e-11, 1e-15).0;
            let right = quad::gauss_kronrod_semi_infinite(g, hi, hi.abs().max(s), 1e-11, 1e-15).0;
            let left = quad::gauss_kronrod_semi_infinite(|u| g(-u), -lo, lo.abs().max(s), 1e-11, 1e-15).0;
            left + mid + right
        };
        let re = integrate(&|nu: f64| self.eval(nu) * y / ((x - nu).powi(2) + y * y));
        let im = integrate(&|nu: f64| self.eval(nu) * (x - nu) / ((x - nu).powi(2) + y * y));
        Complex64::new(re, im)
    }
}

const WEIDEMAN_N: usize = 32;

fn weideman_coefficients() -> &'static (f64, Vec<f64>) {
    static COEFFS: OnceLock<(f64, Vec<f64>)> = OnceLock::new();
    COEFFS.get_or_init(|| {
        let n = WEIDEMAN_N;
        let m = 2 * n;
        let m2 = 2 * m;
        let l = (n as f64 / 2f64.sqrt()).sqrt();
        // f_k for k = −M+1..M−1, preceded by a zero, then fftshifted
        let mut f = vec![0.0; m2];
        for (idx, k) in (-(m as i64) + 1..m as i64).enumerate() {
            let theta = k as f64 * PI / m as f64;
            let t = l * (0.5 * theta).tan();
            f[idx + 1] = (-t * t).exp() * (l * l + t * t);
        }
        let mut buf: Vec<Complex64> = (0..m2).map(|i| Complex64::new(f[(i + m) % m2], 0.0)).collect();
        FftPlanner::new().plan_fft_forward(m2).process(&mut buf);
        let a: Vec<f64> = (1..=n).map(|i| buf[i].re / m2 as f64).collect();
        (l, a)
    })
}

/// Faddeeva function `w(z) = e^{−z²} erfc(−iz)` for `Im z ≥ 0`
/// (Weideman's rational expansion with 32 terms).
pub fn faddeeva(z: Complex64) -> Complex64 {
    let (l, a) = weideman_coefficients();
    let iz = Complex64::i() * z;
    let denom = *l - iz;
    let zz = (*l + iz) / denom;
    // Σ a_n Z^{n−1} by Horner
    let p = a.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * zz + c);
    2.0 * p / (denom * denom) + 1.0 / (PI.sqrt() * denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn faddeeva_on_real_axis_and_known_value() {
        for i in 0..=40 {
            let x = -4.0 + 0.2 * i as f64;
            let w = faddeeva(Complex64::new(x, 0.0));
            assert!((w.re - (-x * x).exp()).abs() < 1e-12, "x={x}: {}", w.re - (-x * x).exp());
            assert!((w.im - 2.0 / PI.sqrt() * dawson(x)).abs() < 1e-12, "x={x}: {}", w.im - 2.0 / PI.sqrt() * dawson(x));
        }
        // w(i) = e erfc(1)
        let w = faddeeva(Complex64::new(0.0, 1.0));
        assert!((w.re - 0.4275835761558070).abs() < 1e-12 && w.im.abs() < 1e-14);
    }

    #[test]
    fn drude_closed_form() {
        let j = SpectralDensity::drude(0.7, 2.0).unwrap();
        for &nu in &[0.0, 0.5, 3.0, 40.0] {
            let g = j.gamma_hat(Complex64::new(nu, 0.0)).unwrap();
            assert!((g.re - PI * j.eval(nu)).abs() < 1e-13);
            let h = j.hilbert_numeric(nu).unwrap();
            assert!((g.im - h).abs() < 1e-8, "nu={nu}: {} vs {h}", g.im);
        }
        let big = j.gamma_hat(Complex64::new(0.0, 1e9)).unwrap();
        assert!(big.norm() < 1e-8);
        assert!((j.gamma_zero() - PI * 0.7 * 2.0).abs() < 1e-14);
    }

    #[test]
    fn gaussian_matches_quadrature() {
        let j = SpectralDensity::gaussian(0.4, 1.5).unwrap();
        for &nu in &[0.0, 0.3, 2.0, 6.0] {
            let g = j.gamma_hat(Complex64::new(nu, 0.0)).unwrap();
            assert!((g.re - PI * j.eval(nu)).abs() < 1e-14);
            assert!((g.im - j.hilbert_numeric(nu).unwrap()).abs() < 1e-9);
        }
        for &z in &[Complex64::new(0.5, 0.1), Complex64::new(-2.0, 1.0), Complex64::new(0.0, 3.0)] {
            let a = j.gamma_hat(z).unwrap();
            let b = j.gamma_hat_numeric(z);
            assert!((a - b).norm() < 1e-9, "{z}: {a} vs {b}");
        }
        // imaginary axis: y ∫ J/(ν² + y²)
        let y = 0.8;
        let direct = quad::gauss_kronrod(|nu| 2.0 * y * j.eval(nu) / (nu * nu + y * y), 0.0, 30.0, 1e-12, 1e-15).0;
        assert!((j.gamma_hat(Complex64::new(0.0, y)).unwrap().re - direct).abs() < 1e-10);
    }

    #[test]
    fn tabulated_drude_approximates_closed_form() {
        let exact = SpectralDensity::drude(1.0, 1.0).unwrap();
        let nu: Vec<f64> = (0..=4000).map(|i| i as f64 * 0.01).collect();
        let j: Vec<f64> = nu.iter().map(|&x| exact.eval(x)).collect();
        let tab = SpectralDensity::tabulated(nu, j).unwrap();
        assert!((tab.gamma_zero() / exact.gamma_zero() - 1.0).abs() < 1e-3);
        for &x in &[0.0, 0.7, 5.0] {
            let a = tab.hilbert(x).unwrap();
            let b = exact.hilbert(x).unwrap();
            assert!((a - b).abs() < 1e-3, "{x}: {a} vs {b}");
        }
        let z = Complex64::new(0.4, 0.5);
        assert!((tab.gamma_hat(z).unwrap() - exact.gamma_hat(z).unwrap()).norm() < 1e-3);
    }

    #[test]
    fn assumption_checks() {
        assert!(SpectralDensity::drude(0.0, 1.0).is_err());
        assert!(SpectralDensity::gaussian(1.0, -1.0).is_err());
        let nu: Vec<f64> = (0..100).map(|i| i as f64 * 0.1).collect();
        let ohmic = vec![1.0; 100];
        assert!(matches!(SpectralDensity::tabulated(nu.clone(), ohmic), Err(Error::AssumptionViolation(_))));
        let mut bad = vec![1.0; 100];
        bad[10] = 0.0;
        assert!(SpectralDensity::tabulated(nu, bad).is_err());
        let asym = SpectralDensity::tabulated(vec![-1.0, 0.0, 1.0, 2.0, 3.0], vec![0.5, 1.0, 0.4, 0.1, 0.05]);
        assert!(matches!(asym, Err(Error::AssumptionViolation(_))));
        let sym = SpectralDensity::tabulated_from_json(r#"{"nu": [-1, 0, 1, 2, 3, 4], "J": [0.5, 1, 0.5, 0.2, 0.09, 0.05]}"#);
        assert!(sym.is_ok(), "{sym:?}");
    }
}
