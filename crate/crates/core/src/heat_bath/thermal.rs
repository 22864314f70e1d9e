use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::correlation::{beta_eff, mode_energy};
use super::green::{green_hat, GreenFunction};
use super::spectral::SpectralDensity;
use crate::error::{Error, Result};
use crate::noise::CovarianceSpec;
use crate::quad;

/// How the equilibrium second moments are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThermalMethod {
    /// `∫ J(ν) ν²|Ĝ(ν)|² e(ν) dν` with `e(ν) = (ħν/2)coth(βħν/2)`.
    SpectralIntegral,
    /// Principal-value integral of `Ĝ` against `coth`, paired at `±ν`.
    PvIntegral,
    /// Sum over Matsubara frequencies `2πl/(βħ)` on the imaginary axis.
    Matsubara,
}

impl ThermalMethod {
    pub const ALL: [ThermalMethod; 3] = [Self::SpectralIntegral, Self::PvIntegral, Self::Matsubara];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalValues {
    pub p2: f64,
    pub q2: f64,
}

fn check_params(mass: f64, omega: f64, beta: f64, hbar: f64) -> Result<()> {
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::InvalidParameter(format!("mass must be positive, got {mass}")));
    }
    if !(omega >= 0.0 && omega.is_finite()) {
        return Err(Error::InvalidParameter(format!("omega must be non-negative, got {omega}")));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!("beta must be positive and finite, got {beta}")));
    }
    if !(hbar >= 0.0 && hbar.is_finite()) {
        return Err(Error::InvalidParameter(format!("hbar must be non-negative, got {hbar}")));
    }
    Ok(())
}

/// Resonance of `|Ĝ|²` on the positive axis and its half-width.
fn resonance(j: &SpectralDensity, mass: f64, omega: f64) -> Result<Option<(f64, f64)>> {
    if omega == 0.0 {
        return Ok(None);
    }
    let mut nu = omega;
    for _ in 0..30 {
        let shifted = omega * omega + nu * j.hilbert(nu)? / mass;
        if shifted <= 0.0 {
            break;
        }
        nu = shifted.sqrt();
    }
    let width = (PI * j.eval(nu) / (2.0 * mass)).max(1e-9 * nu);
    Ok(Some((nu, width)))
}

/// `∫₀^∞ f(ν) dν` for integrands shaped by `Ĝ` on the real axis, split at the
/// resonance and the bath scale.
fn positive_axis_integral(
    j: &SpectralDensity,
    mass: f64,
    omega: f64,
    f: impl Fn(f64) -> Result<f64>,
) -> Result<f64> {
    let scale = j.scale();
    let wj = (omega * omega + j.gamma_zero() / mass).sqrt();
    let mut points = vec![0.0, 0.5 * scale, scale, 4.0 * scale, wj, 2.0 * wj];
    if let Some((nu, w)) = resonance(j, mass, omega)? {
        for k in [-100.0, -10.0, -3.0, -1.0, 0.0, 1.0, 3.0, 10.0, 100.0] {
            points.push(nu + k * w);
        }
        points.push(0.5 * nu);
    }
    points.retain(|&x| x >= 0.0 && x.is_finite());
    points.sort_by(f64::total_cmp);
    points.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs().max(1e-300));
    let err = std::cell::Cell::new(None);
    let g = |x: f64| match f(x) {
        Ok(v) => v,
        Err(e) => {
            err.set(Some(e));
            0.0
        }
    };
    let mut total = 0.0;
    for w in points.windows(2) {
        total += quad::gauss_kronrod(&g, w[0], w[1], 1e-12, 0.0).0;
    }
    let last = *points.last().expect("non-empty");
    total += quad::gauss_kronrod_semi_infinite(&g, last, last.max(scale), 1e-12, 0.0).0;
    if let Some(e) = err.take() {
        return Err(e);
    }
    Ok(total)
}

fn g_real(j: &SpectralDensity, mass: f64, omega: f64, nu: f64) -> Result<Complex64> {
    green_hat(j, mass, omega, Complex64::new(nu, 0.0))
}

/// `Ĝ(iy)`, real and positive.
fn g_imag(j: &SpectralDensity, mass: f64, omega: f64, y: f64) -> Result<f64> {
    let gamma = j.gamma_hat(Complex64::new(0.0, y))?.re;
    Ok(1.0 / (omega * omega + y * y + y * gamma / mass))
}

/// Equilibrium `⟨p²⟩`.
pub fn thermal_p2(j: &SpectralDensity, mass: f64, omega: f64, beta: f64, hbar: f64, method: ThermalMethod) -> Result<f64> {
    check_params(mass, omega, beta, hbar)?;
    j.check_assumptions()?;
    let e = |nu: f64| mode_energy(nu, beta, hbar);
    match method {
        ThermalMethod::SpectralIntegral => {
            let f = |nu: f64| Ok(j.eval(nu) * nu * nu * g_real(j, mass, omega, nu)?.norm_sqr() * e(nu));
            Ok(2.0 * positive_axis_integral(j, mass, omega, f)?)
        }
        ThermalMethod::PvIntegral => {
            // (m/πi) PV∫ (ν²Ĝ(ν) + 1) e(ν)/ν dν, the ±ν pair cancels the pole at 0
            let f = |nu: f64| {
                if nu == 0.0 {
                    return Ok(0.0);
                }
                let plus = nu * nu * g_real(j, mass, omega, nu)? + 1.0;
                let minus = nu * nu * g_real(j, mass, omega, -nu)? + 1.0;
                Ok(((plus - minus) * e(nu) / nu / Complex64::i()).re)
            };
            Ok(mass / PI * positive_axis_integral(j, mass, omega, f)?)
        }
        ThermalMethod::Matsubara => {
            let term = |y: f64| -> Result<f64> {
                let gamma = j.gamma_hat(Complex64::new(0.0, y))?.re;
                let num = omega * omega + y * gamma / mass;
                Ok(num / (num + y * y))
            };
            Ok(mass / beta * (1.0 + 2.0 * matsubara_sum(j, mass, omega, beta, hbar, term)?))
        }
    }
}

/// Equilibrium `⟨q²⟩`; needs `ω > 0`.
pub fn thermal_q2(j: &SpectralDensity, mass: f64, omega: f64, beta: f64, hbar: f64, method: ThermalMethod) -> Result<f64> {
    check_params(mass, omega, beta, hbar)?;
    j.check_assumptions()?;
    if omega == 0.0 {
        return Err(Error::InvalidParameter("the equilibrium position variance needs omega > 0".into()));
    }
    let e = |nu: f64| mode_energy(nu, beta, hbar);
    match method {
        ThermalMethod::SpectralIntegral => {
            let f = |nu: f64| Ok(j.eval(nu) * g_real(j, mass, omega, nu)?.norm_sqr() * e(nu));
            Ok(2.0 * positive_axis_integral(j, mass, omega, f)? / (mass * mass))
        }
        ThermalMethod::PvIntegral => {
            let f = |nu: f64| {
                if nu == 0.0 {
                    // limit of Im Ĝ(ν)/ν
                    return Ok(0.0);
                }
                let d = g_real(j, mass, omega, nu)? - g_real(j, mass, omega, -nu)?;
                Ok((d * e(nu) / nu / Complex64::i()).re)
            };
            Ok(positive_axis_integral(j, mass, omega, f)? / (PI * mass))
        }
        ThermalMethod::Matsubara => {
            let term = |y: f64| g_imag(j, mass, omega, y);
            let sum = matsubara_sum(j, mass, omega, beta, hbar, term)?;
            Ok((1.0 / (omega * omega) + 2.0 * sum) / (mass * beta))
        }
    }
}

/// `Σ_{l≥1} f(2πl/βħ)`: direct terms up to `l_max`, then an Euler–Maclaurin
/// tail `∫ f + f/2 − f′/12 + f‴/720` at the cut.
fn matsubara_sum(
    j: &SpectralDensity,
    mass: f64,
    omega: f64,
    beta: f64,
    hbar: f64,
    f: impl Fn(f64) -> Result<f64>,
) -> Result<f64> {
    if hbar == 0.0 {
        return Ok(0.0);
    }
    let step = 2.0 * PI / (beta * hbar);
    let wj = (omega * omega + j.gamma_zero() / mass).sqrt();
    let reach = 50.0 * (j.scale() + wj);
    let l_max = ((reach / step).ceil() as usize).clamp(64, 1 << 20);
    let mut partial = 0.0;
    for l in 1..=l_max {
        partial += f(l as f64 * step)?;
    }
    let err = std::cell::Cell::new(None);
    let g = |l: f64| match f(l * step) {
        Ok(v) => v,
        Err(e) => {
            err.set(Some(e));
            0.0
        }
    };
    let lm = l_max as f64;
    let integral = quad::gauss_kronrod_semi_infinite(&g, lm, lm, 1e-12, 0.0).0;
    let h = 0.25;
    let d1 = (g(lm + h) - g(lm - h)) / (2.0 * h);
    let d3 = (g(lm + 2.0 * h) - 2.0 * g(lm + h) + 2.0 * g(lm - h) - g(lm - 2.0 * h)) / (2.0 * h * h * h);
    // Σ_{l > L} f(l) = ∫_L^∞ f − f(L)/2 − f′(L)/12 + f‴(L)/720
    let tail = integral - 0.5 * g(lm) - d1 / 12.0 + d3 / 720.0;
    if let Some(e) = err.take() {
        return Err(e);
    }
    Ok(partial + tail)
}

/// Both equilibrium moments by one method; needs `ω > 0`.
pub fn thermal_values(
    j: &SpectralDensity,
    mass: f64,
    omega: f64,
    beta: f64,
    hbar: f64,
    method: ThermalMethod,
) -> Result<ThermalValues> {
    Ok(ThermalValues {
        q2: thermal_q2(j, mass, omega, beta, hbar, method)?,
        p2: thermal_p2(j, mass, omega, beta, hbar, method)?,
    })
}

/// Terms of the chain
/// `max{1/2β, (ω/ω_J)²/2β_eff(ħω_J)} ≤ mω²⟨q²⟩/2 ≤ 1/2β_eff(ħω) ≤ ⟨p²⟩/2m ≤ 1/2β_eff(ħω_J)`
/// with `ω_J² = ω² + γ(0)/m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityChain {
    pub lower: f64,
    pub potential: f64,
    pub middle: f64,
    pub kinetic: f64,
    pub upper: f64,
}

impl InequalityChain {
    pub fn new(j: &SpectralDensity, mass: f64, omega: f64, beta: f64, hbar: f64, values: &ThermalValues) -> Self {
        let wj = (omega * omega + j.gamma_zero() / mass).sqrt();
        let lower = (0.5 / beta).max((omega / wj).powi(2) * 0.5 / beta_eff(hbar * wj, beta));
        Self {
            lower,
            potential: 0.5 * mass * omega * omega * values.q2,
            middle: 0.5 / beta_eff(hbar * omega, beta),
            kinetic: 0.5 * values.p2 / mass,
            upper: 0.5 / beta_eff(hbar * wj, beta),
        }
    }

    /// Whether every link holds up to a relative slack `rel`.
    pub fn holds(&self, rel: f64) -> bool {
        let le = |a: f64, b: f64| a <= b * (1.0 + rel);
        le(self.lower, self.potential) && le(self.potential, self.middle) && le(self.middle, self.kinetic) && le(self.kinetic, self.upper)
    }
}

/// Long-time behaviour of the reduced moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LongTimeLimits {
    /// `lim ⟨p²⟩_t`.
    pub p2: f64,
    /// `lim ⟨q²⟩_t` for `ω > 0`.
    pub q2: Option<f64>,
    /// `lim ⟨q²⟩_t / t` for `ω = 0`.
    pub diffusion_constant: Option<f64>,
    /// Noise part `(−∂_q²C)(0) ∫ ν²|Ĝ|² dν/2π` of `p2`.
    pub p2_noise: f64,
    /// Noise part `(−∂_q²C)(0) m⁻² ∫ |Ĝ|² dν/2π` of `q2`.
    pub q2_noise: Option<f64>,
}

pub(crate) fn force_strength(spec: &CovarianceSpec) -> Result<f64> {
    if !spec.is_position_only() {
        return Err(Error::MomentumDependentNoise);
    }
    Ok(spec.force_strength())
}

/// `∫ ν²|Ĝ(ν)|² dν/2π` over the real line, equal to `∫₀^∞ Ġ(s)² ds`.
pub fn gdot_square_norm(j: &SpectralDensity, mass: f64, omega: f64) -> Result<f64> {
    let f = |nu: f64| Ok(nu * nu * g_real(j, mass, omega, nu)?.norm_sqr());
    Ok(positive_axis_integral(j, mass, omega, f)? / PI)
}

/// `∫ |Ĝ(ν)|² dν/2π` over the real line, equal to `∫₀^∞ G(s)² ds`; needs `ω > 0`.
pub fn g_square_norm(j: &SpectralDensity, mass: f64, omega: f64) -> Result<f64> {
    if omega == 0.0 {
        return Err(Error::InvalidParameter("G is not square integrable for omega = 0".into()));
    }
    let f = |nu: f64| Ok(g_real(j, mass, omega, nu)?.norm_sqr());
    Ok(positive_axis_integral(j, mass, omega, f)? / PI)
}

pub fn longtime_limits(
    j: &SpectralDensity,
    spec: &CovarianceSpec,
    mass: f64,
    omega: f64,
    beta: f64,
    hbar: f64,
) -> Result<LongTimeLimits> {
    check_params(mass, omega, beta, hbar)?;
    j.check_assumptions()?;
    let d0 = force_strength(spec)?;
    let p2_eq = thermal_p2(j, mass, omega, beta, hbar, ThermalMethod::SpectralIntegral)?;
    let p2_noise = if d0 > 0.0 { d0 * gdot_square_norm(j, mass, omega)? } else { 0.0 };
    if omega > 0.0 {
        let q2_eq = thermal_q2(j, mass, omega, beta, hbar, ThermalMethod::SpectralIntegral)?;
        let q2_noise = if d0 > 0.0 { d0 * g_square_norm(j, mass, omega)? / (mass * mass) } else { 0.0 };
        Ok(LongTimeLimits {
            p2: p2_eq + p2_noise,
            q2: Some(q2_eq + q2_noise),
            diffusion_constant: None,
            p2_noise,
            q2_noise: Some(q2_noise),
        })
    } else {
        let pj = PI * j.j_zero();
        Ok(LongTimeLimits {
            p2: p2_eq + p2_noise,
            q2: None,
            diffusion_constant: Some(2.0 / pj * (1.0 / beta + d0 / (2.0 * pj))),
            p2_noise,
            q2_noise: None,
        })
    }
}

/// Time- and frequency-side values of `∫Ġ²` and `∫G²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParsevalCheck {
    pub gdot_time: f64,
    pub gdot_freq: f64,
    pub g_time: Option<f64>,
    pub g_freq: Option<f64>,
}

impl ParsevalCheck {
    /// Largest relative mismatch.
    pub fn max_rel_error(&self) -> f64 {
        let mut e = (self.gdot_time / self.gdot_freq - 1.0).abs();
        if let (Some(a), Some(b)) = (self.g_time, self.g_freq) {
            e = e.max((a / b - 1.0).abs());
        }
        e
    }
}

/// Compares time integrals over the Green-function grid with the frequency
/// integrals; the grid should extend well past `1/η`.
pub fn parseval_check(gf: &GreenFunction) -> Result<ParsevalCheck> {
    let j = gf.spectral_density();
    let h = gf.dt();
    let sq = |u: &[f64], du: &[f64]| {
        let n = u.len() - 1;
        let f: Vec<f64> = u.iter().map(|v| v * v).collect();
        // trapezoid with the endpoint derivative correction
        quad::trapezoid(&f, h) - h * h / 12.0 * (2.0 * u[n] * du[n] - 2.0 * u[0] * du[0])
    };
    let gdot_time = sq(gf.g_dot(), gf.g_ddot());
    let gdot_freq = gdot_square_norm(j, gf.mass(), gf.omega())?;
    let (g_time, g_freq) = if gf.omega() > 0.0 {
        (Some(sq(gf.g(), gf.g_dot())), Some(g_square_norm(j, gf.mass(), gf.omega())?))
    } else {
        (None, None)
    };
    Ok(ParsevalCheck { gdot_time, gdot_freq, g_time, g_freq })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_methods_agree_on_drude() {
        let j = SpectralDensity::drude(0.2, 5.0).unwrap();
        let vals: Vec<ThermalValues> =
            ThermalMethod::ALL.iter().map(|&m| thermal_values(&j, 1.0, 1.0, 1.0, 1.0, m).unwrap()).collect();
        for v in &vals[1..] {
            assert!((v.p2 / vals[0].p2 - 1.0).abs() < 1e-6, "{v:?} vs {:?}", vals[0]);
            assert!((v.q2 / vals[0].q2 - 1.0).abs() < 1e-6, "{v:?} vs {:?}", vals[0]);
        }
        let chain = InequalityChain::new(&j, 1.0, 1.0, 1.0, 1.0, &vals[0]);
        assert!(chain.holds(1e-9), "{chain:?}");
    }

    #[test]
    fn classical_and_weak_coupling_limits() {
        let j = SpectralDensity::gaussian(0.3, 2.0).unwrap();
        for m in ThermalMethod::ALL {
            let v = thermal_values(&j, 1.5, 0.8, 2.0, 1e-6, m).unwrap();
            assert!((v.p2 / (1.5 / 2.0) - 1.0).abs() < 1e-4, "{m:?} {v:?}");
            assert!((1.5 * 0.64 * v.q2 * 2.0 - 1.0).abs() < 1e-4, "{m:?} {v:?}");
        }
        let weak = SpectralDensity::drude(1e-4, 3.0).unwrap();
        let v = thermal_values(&weak, 1.0, 1.0, 1.0, 1.0, ThermalMethod::Matsubara).unwrap();
        let target = 0.5 / (0.5f64).tanh();
        assert!((v.p2 / target - 1.0).abs() < 1e-3, "{} vs {target}", v.p2);
    }

    #[test]
    fn zero_frequency_position_rejected() {
        let j = SpectralDensity::drude(1.0, 1.0).unwrap();
        assert!(thermal_q2(&j, 1.0, 0.0, 1.0, 1.0, ThermalMethod::Matsubara).is_err());
        assert!(thermal_p2(&j, 1.0, 0.0, 1.0, 1.0, ThermalMethod::Matsubara).is_ok());
    }

    #[test]
    fn einstein_relation() {
        let j = SpectralDensity::drude(1.0, 3.0).unwrap();
        let lim = longtime_limits(&j, &CovarianceSpec::constant(0.0).unwrap(), 1.0, 0.0, 1.0, 1.0).unwrap();
        assert!((lim.diffusion_constant.unwrap() - 2.0 / PI).abs() < 1e-14);
        assert_eq!(lim.p2_noise, 0.0);
    }

    #[test]
    fn parseval_on_grid() {
        let j = SpectralDensity::drude(0.5, 2.0).unwrap();
        let gf = GreenFunction::new(&j, 1.0, 1.0, 60.0).unwrap();
        let pc = parseval_check(&gf).unwrap();
        assert!(pc.max_rel_error() < 1e-5, "{pc:?}");
    }
}
