use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use super::correlation::BathCorrelation;
use super::green::GreenFunction;
use super::spectral::SpectralDensity;
use super::thermal::force_strength;
use crate::error::{Error, Result};
use crate::noise::CovarianceSpec;
use crate::semigroup::GaussianMoments;

/// Reduced second moments of the system at time `t`, split into the
/// transported initial part, the bath part and the random-field part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReducedMoments {
    pub t: f64,
    pub p2: f64,
    pub q2: f64,
    pub p2_initial: f64,
    pub q2_initial: f64,
    pub p2_bath: f64,
    pub q2_bath: f64,
    pub p2_noise: f64,
    pub q2_noise: f64,
}

/// Oscillator in a macroscopic bath plus the random force field, with the
/// Green function precomputed up to a horizon.
#[derive(Debug, Clone)]
pub struct ReducedDynamics {
    green: GreenFunction,
    correlation: BathCorrelation,
    force_strength: f64,
}

impl ReducedDynamics {
    pub fn new(
        j: &SpectralDensity,
        spec: &CovarianceSpec,
        mass: f64,
        omega: f64,
        beta: f64,
        hbar: f64,
        t_max: f64,
    ) -> Result<Self> {
        let force_strength = force_strength(spec)?;
        let correlation = BathCorrelation::new(j, beta, hbar)?;
        let green = GreenFunction::new(j, mass, omega, t_max)?;
        Ok(Self { green, correlation, force_strength })
    }

    pub fn green(&self) -> &GreenFunction {
        &self.green
    }

    pub fn correlation(&self) -> &BathCorrelation {
        &self.correlation
    }

    /// Moments at `t ≤ t_max` from the given initial system moments.
    pub fn moments(&self, initial: &GaussianMoments, t: f64) -> Result<ReducedMoments> {
        crate::error::check_time(t)?;
        let m = self.green.mass();
        let raw = initial.raw_second();
        let (pp, pq, qq) = (raw[(0, 0)], raw[(0, 1)], raw[(1, 1)]);
        let [g, gd, gdd] = self.green.eval(t)?;
        let p2_initial = gd * gd * pp + 2.0 * m * gd * gdd * pq + m * m * gdd * gdd * qq;
        let q2_initial = g * g / (m * m) * pp + 2.0 * g * gd / m * pq + gd * gd * qq;
        if t == 0.0 {
            return Ok(ReducedMoments {
                t,
                p2: p2_initial,
                q2: q2_initial,
                p2_initial,
                q2_initial,
                p2_bath: 0.0,
                q2_bath: 0.0,
                p2_noise: 0.0,
                q2_noise: 0.0,
            });
        }
        // resample on a grid ending exactly at t
        let n = ((t / self.green.dt()).ceil() as usize).max(8);
        let h = t / n as f64;
        let samples: Vec<[f64; 3]> = (0..=n).map(|k| self.green.eval(k as f64 * h)).collect::<Result<_>>()?;
        let gs: Vec<f64> = samples.iter().map(|s| s[0]).collect();
        let gds: Vec<f64> = samples.iter().map(|s| s[1]).collect();
        let gdds: Vec<f64> = samples.iter().map(|s| s[2]).collect();
        let p2_bath = self.forced_variance(&gds, h);
        let q2_bath = self.forced_variance(&gs, h) / (m * m);
        let p2_noise = self.force_strength * square_integral(&gds, &gdds, h);
        let q2_noise = self.force_strength * square_integral(&gs, &gds, h) / (m * m);
        Ok(ReducedMoments {
            t,
            p2: p2_initial + p2_bath + p2_noise,
            q2: q2_initial + q2_bath + q2_noise,
            p2_initial,
            q2_initial,
            p2_bath,
            q2_bath,
            p2_noise,
            q2_noise,
        })
    }

    /// `∫₀ᵗ∫₀ᵗ u(s) Φ_β(s − s′) u(s′) ds ds′ = ∫ J(ν) e(ν) |û_t(ν)|² dν` with
    /// `û_t(ν) = ∫₀ᵗ u(s) e^{iνs} ds` taken exactly for the piecewise-linear
    /// interpolant of the samples.
    fn forced_variance(&self, u: &[f64], h: f64) -> f64 {
        let n = u.len() - 1;
        let t = n as f64 * h;
        let j = self.correlation.spectral_density();
        let (beta, hbar) = (self.correlation.beta(), self.correlation.hbar());
        // Φ_β decays on the slower of the bath and Matsubara scales; the
        // frequency step must resolve lags up to t plus that decay
        let mut rate = j.scale();
        if hbar > 0.0 {
            rate = rate.min(2.0 * PI / (beta * hbar));
        }
        let span = 2.0 * t + 40.0 / rate;
        let len = ((span / h).ceil() as usize).next_power_of_two().max(2 * (n + 1).next_power_of_two());
        let mut s = vec![Complex64::new(0.0, 0.0); len];
        for (k, &v) in u.iter().enumerate() {
            s[k] = Complex64::new(v, 0.0);
        }
        // S(ν_j) = Σ u_k e^{+iν_j kh}
        FftPlanner::new().plan_fft_inverse(len).process(&mut s);
        let dnu = 2.0 * PI / (len as f64 * h);
        let periods = 2;
        let (u0, un) = (u[0], u[n]);
        let total: f64 = (0..periods * len)
            .into_par_iter()
            .map(|idx| {
                let nu = idx as f64 * dnu;
                let theta = nu * h;
                let (a, b) = half_hat_moments(theta);
                let sinc = if theta.abs() < 1e-4 { 1.0 - theta * theta / 12.0 } else { (0.5 * theta).sin() / (0.5 * theta) };
                let end = Complex64::from_polar(1.0, nu * t);
                let back = Complex64::from_polar(1.0, nu * (t - h));
                let uhat = h * sinc * sinc * (s[idx % len] - u0 - un * end) + u0 * h * (a - b) + un * h * back * b;
                let w = if idx == 0 { 0.5 } else { 1.0 };
                w * self.correlation.weight(nu) * uhat.norm_sqr()
            })
            .sum();
        let cutoff = periods as f64 * len as f64 * dnu;
        // beyond the cutoff |û|² ≈ (u₀² + u_n²)/ν²
        let tail = self.correlation.weight(cutoff) * (u0 * u0 + un * un) / (2.0 * cutoff);
        2.0 * (total * dnu + tail)
    }
}

/// `(∫₀¹ e^{iθx} dx, ∫₀¹ x e^{iθx} dx)`.
fn half_hat_moments(theta: f64) -> (Complex64, Complex64) {
    if theta.abs() < 0.5 {
        let it = Complex64::new(0.0, theta);
        let mut a = Complex64::new(0.0, 0.0);
        let mut b = Complex64::new(0.0, 0.0);
        let mut pow = Complex64::new(1.0, 0.0);
        let mut fact = 1.0;
        for k in 0..20 {
            // (iθ)^k / k! · 1/(k+1) and 1/(k+2)
            a += pow / (fact * (k + 1) as f64);
            b += pow / (fact * (k + 2) as f64);
            pow *= it;
            fact *= (k + 1) as f64;
        }
        (a, b)
    } else {
        let it = Complex64::new(0.0, theta);
        let e = it.exp();
        let a = (e - 1.0) / it;
        let b = e / it - (e - 1.0) / (it * it);
        (a, b)
    }
}

/// `∫₀ᵗ u² ds` from samples and derivative samples (corrected trapezoid).
fn square_integral(u: &[f64], du: &[f64], h: f64) -> f64 {
    let n = u.len() - 1;
    let f: Vec<f64> = u.iter().map(|v| v * v).collect();
    crate::quad::trapezoid(&f, h) - h * h / 6.0 * (u[n] * du[n] - u[0] * du[0])
}

/// One-shot reduced moments at time `t`.
#[allow(clippy::too_many_arguments)]
pub fn reduced_moments(
    j: &SpectralDensity,
    spec: &CovarianceSpec,
    mass: f64,
    omega: f64,
    beta: f64,
    hbar: f64,
    t: f64,
    initial: &GaussianMoments,
) -> Result<ReducedMoments> {
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    ReducedDynamics::new(j, spec, mass, omega, beta, hbar, t.max(1e-3))?.moments(initial, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heat_bath::{discretize_bath, finite_n_moments, longtime_limits};
    use crate::quad;

    #[test]
    fn time_zero_returns_initial_moments() {
        let j = SpectralDensity::drude(0.5, 2.0).unwrap();
        let init = GaussianMoments::new([0.4, -1.0], nalgebra::Matrix2::new(0.3, 0.05, 0.05, 0.7));
        let r = reduced_moments(&j, &CovarianceSpec::gaussian_q(0.2, 1.0).unwrap(), 1.0, 1.0, 1.0, 1.0, 0.0, &init).unwrap();
        let raw = init.raw_second();
        assert!((r.p2 - raw[(0, 0)]).abs() < 1e-5);
        assert!((r.q2 - raw[(1, 1)]).abs() < 1e-12);
    }

    #[test]
    fn forced_variance_matches_direct_double_integral() {
        // Gaussian bath: Φ_β is smooth, so the double integral can be done directly
        let j = SpectralDensity::gaussian(0.4, 1.0).unwrap();
        let dynamics =
            ReducedDynamics::new(&j, &CovarianceSpec::constant(0.0).unwrap(), 1.0, 1.0, 1.0, 0.5, 3.0).unwrap();
        let t = 2.5;
        let r = dynamics.moments(&GaussianMoments::point(0.0, 0.0), t).unwrap();
        let phi = dynamics.correlation();
        let gf = dynamics.green();
        let inner = |s: f64| {
            quad::gauss_kronrod(|s2| gf.eval(s2).unwrap()[0] * phi.eval(s - s2), 0.0, t, 1e-9, 1e-13).0
        };
        let direct = quad::gauss_kronrod(|s| gf.eval(s).unwrap()[0] * inner(s), 0.0, t, 1e-8, 1e-12).0;
        assert!((r.q2_bath / direct - 1.0).abs() < 1e-4, "{} vs {direct}", r.q2_bath);
    }

    #[test]
    fn saturates_at_longtime_limits() {
        let j = SpectralDensity::drude(0.5, 3.0).unwrap();
        let spec = CovarianceSpec::gaussian_q(0.3, 1.0).unwrap();
        let lim = longtime_limits(&j, &spec, 1.0, 1.0, 1.0, 1.0).unwrap();
        let r = reduced_moments(&j, &spec, 1.0, 1.0, 1.0, 1.0, 60.0, &GaussianMoments::point(0.0, 0.0)).unwrap();
        assert!((r.p2 / lim.p2 - 1.0).abs() < 1e-3, "{} vs {}", r.p2, lim.p2);
        assert!((r.q2 / lim.q2.unwrap() - 1.0).abs() < 1e-3, "{} vs {:?}", r.q2, lim.q2);
    }

    #[test]
    fn classical_bath_matches_fine_discretization() {
        let j = SpectralDensity::drude(0.3, 2.0).unwrap();
        let spec = CovarianceSpec::gaussian_q(0.5, 1.0).unwrap();
        let init = GaussianMoments::new([0.2, 0.5], nalgebra::Matrix2::new(0.5, 0.0, 0.0, 0.5));
        let t = 4.0;
        let r = reduced_moments(&j, &spec, 1.0, 1.0, 1.0, 0.7, t, &init).unwrap();
        let bath = discretize_bath(&j, 4000, 4000.0, 1.0, 1.0).unwrap();
        let f = finite_n_moments(&bath, spec.force_strength(), 1.0, 0.7, &init, t).unwrap();
        assert!((r.p2 / f.p2 - 1.0).abs() < 5e-3, "{} vs {}", r.p2, f.p2);
        assert!((r.q2 / f.q2 - 1.0).abs() < 5e-3, "{} vs {}", r.q2, f.q2);
    }
}
