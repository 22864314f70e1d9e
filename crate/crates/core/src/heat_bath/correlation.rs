use std::f64::consts::PI;

use rayon::prelude::*;

use super::spectral::SpectralDensity;
use crate::error::{Error, Result};
use crate::quad;

/// Effective inverse temperature `(2/E) tanh(βE/2)` of a bath mode of
/// energy quantum `E`; tends to `β` as `E → 0`.
pub fn beta_eff(energy: f64, beta: f64) -> f64 {
    let e = energy.abs();
    let x = 0.5 * beta * e;
    if x < 1e-8 {
        return beta * (1.0 - x * x / 3.0);
    }
    2.0 / e * x.tanh()
}

/// `1/β_eff(ħν) = (ħν/2) coth(βħν/2)`, the mean energy per unit
/// of `J` at frequency `ν`.
pub(crate) fn mode_energy(nu: f64, beta: f64, hbar: f64) -> f64 {
    1.0 / beta_eff(hbar * nu, beta)
}

/// Covariance function `Φ_β(t) = ∫ J(ν) (ħν/2) coth(βħν/2) e^{iνt} dν` of
/// the driving force in the macroscopic limit.
#[derive(Debug, Clone, PartialEq)]
pub struct BathCorrelation {
    spectral: SpectralDensity,
    beta: f64,
    hbar: f64,
}

impl BathCorrelation {
    pub fn new(spectral: &SpectralDensity, beta: f64, hbar: f64) -> Result<Self> {
        spectral.check_assumptions()?;
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be positive and finite, got {beta}")));
        }
        if !(hbar >= 0.0 && hbar.is_finite()) {
            return Err(Error::InvalidParameter(format!("hbar must be non-negative, got {hbar}")));
        }
        Ok(Self { spectral: spectral.clone(), beta, hbar })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn spectral_density(&self) -> &SpectralDensity {
        &self.spectral
    }

    /// Spectral weight `J(ν)(ħν/2)coth(βħν/2)`.
    pub fn weight(&self, nu: f64) -> f64 {
        self.spectral.eval(nu) * mode_energy(nu, self.beta, self.hbar)
    }

    /// `∫ Φ_β(t) dt = 2πJ(0)/β`.
    pub fn integral(&self) -> f64 {
        2.0 * PI * self.spectral.j_zero() / self.beta
    }

    /// `Φ_β(t)`. Diverges logarithmically at `t = 0` when `ħ > 0` and
    /// `ν²J(ν)` has a nonzero limit; that case returns `+∞`.
    pub fn eval(&self, t: f64) -> f64 {
        let t = t.abs();
        // ħL/(2ν) tail of the weight, regularised at the origin
        let log_amp = 0.5 * self.hbar * self.spectral.tail_limit();
        if t == 0.0 && log_amp > 0.0 {
            return f64::INFINITY;
        }
        let a = self.spectral.scale();
        let model = |nu: f64| {
            if log_amp == 0.0 {
                0.0
            } else if nu < 1e-8 * a {
                log_amp / a
            } else {
                log_amp * (-(nu / a)).exp_m1().abs() / nu
            }
        };
        let f = |nu: f64| 2.0 * (self.weight(nu) - model(nu));
        let norm = (f(0.0).abs() + f(a).abs()) * a;
        if t == 0.0 {
            return quad::gauss_kronrod(f, 0.0, a, 1e-11, 1e-14 * norm).0
                + quad::gauss_kronrod_semi_infinite(f, a, a, 1e-11, 1e-14 * norm).0;
        }
        let model_part = if log_amp > 0.0 { log_amp * (1.0 / (a * t).powi(2)).ln_1p() } else { 0.0 };
        // chunked quadrature up to a cutoff, then an asymptotic tail
        let cutoff = (60.0 * a).max(60.0 / t);
        let chunk = (2.0 * PI / t).min(a).max(cutoff / 400.0);
        let chunks = (cutoff / chunk).ceil() as usize;
        let cutoff = chunks as f64 * chunk;
        let g = |nu: f64| f(nu) * (nu * t).cos();
        let floor = 1e-13 * norm / chunks as f64;
        let body: f64 = (0..chunks)
            .map(|k| quad::gauss_kronrod(g, k as f64 * chunk, (k + 1) as f64 * chunk, 1e-10, floor).0)
            .sum();
        // ∫_Λ^∞ f cos(νt) ≈ −f(Λ) sin(Λt)/t − f′(Λ) cos(Λt)/t²
        let d = 1e-3 * cutoff;
        let fp = (f(cutoff + d) - f(cutoff - d)) / (2.0 * d);
        model_part + body - f(cutoff) * (cutoff * t).sin() / t - fp * (cutoff * t).cos() / (t * t)
    }

    /// `Φ_β` on a set of times, evaluated in parallel.
    pub fn sample(&self, times: &[f64]) -> Vec<f64> {
        times.par_iter().map(|&t| self.eval(t)).collect()
    }
}
