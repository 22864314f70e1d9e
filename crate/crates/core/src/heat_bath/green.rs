use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use super::spectral::SpectralDensity;
use crate::error::{Error, Result};

/// `Ĝ(z) = 1/(ω² − z² − izγ̂(z)/m)` for `Im z ≥ 0`.
pub fn green_hat(j: &SpectralDensity, mass: f64, omega: f64, z: Complex64) -> Result<Complex64> {
    let gamma = j.gamma_hat(z)?;
    let d = omega * omega - z * z - Complex64::i() * z * gamma / mass;
    if d.norm() == 0.0 {
        return Err(Error::InvalidParameter(format!("Green function has a pole at z = {z}")));
    }
    Ok(1.0 / d)
}

/// Drude-damped oscillator sharing `J(0)` and `γ(0)` with the real bath.
/// Its transform is `−(z + iλ)/P(z)` with a cubic `P` whose roots lie on or
/// below the real axis.
#[derive(Debug, Clone)]
struct Reference {
    gamma0: f64,
    lambda: f64,
    poles: [Complex64; 3],
    residues: [Complex64; 3],
}

impl Reference {
    fn new(j: &SpectralDensity, mass: f64, omega: f64) -> Self {
        let gamma0 = j.gamma_zero();
        let mut lambda = gamma0 / (PI * j.j_zero());
        loop {
            let wj2 = omega * omega + gamma0 / mass;
            let ys = cubic_roots(-lambda, wj2, -lambda * omega * omega);
            let scale = lambda.max(wj2.sqrt());
            let sep = (0..3)
                .flat_map(|a| (a + 1..3).map(move |b| (a, b)))
                .map(|(a, b)| (ys[a] - ys[b]).norm())
                .fold(f64::INFINITY, f64::min);
            if sep > 1e-4 * scale {
                let poles = ys.map(|y| Complex64::new(0.0, -1.0) * y);
                let i = Complex64::i();
                let residues = poles.map(|z| {
                    let dp = 3.0 * z * z + 2.0 * i * lambda * z - wj2;
                    i * (z + i * lambda) / dp
                });
                return Self { gamma0, lambda, poles, residues };
            }
            lambda *= 1.05;
        }
    }

    fn gamma_hat(&self, z: Complex64) -> Complex64 {
        Complex64::i() * self.gamma0 / (z + Complex64::i() * self.lambda)
    }

    /// `(G, Ġ, G̈)` at `t ≥ 0`.
    fn eval(&self, t: f64) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (z, r) in self.poles.iter().zip(&self.residues) {
            let e = r * (-Complex64::i() * z * t).exp();
            let d = -Complex64::i() * z;
            out[0] += e.re;
            out[1] += (e * d).re;
            out[2] += (e * d * d).re;
        }
        out
    }

    /// Slowest decay rate among the nonzero poles.
    fn decay_rate(&self) -> f64 {
        self.poles
            .iter()
            .map(|z| -z.im)
            .filter(|&r| r > 1e-12 * self.lambda)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Roots of the monic cubic `y³ + a y² + b y + c` with real coefficients,
/// assuming `c ≤ 0` so a root lies in `[0, ∞)`.
fn cubic_roots(a: f64, b: f64, c: f64) -> [Complex64; 3] {
    let f = |y: f64| ((y + a) * y + b) * y + c;
    let mut lo = 0.0;
    let mut hi = 1.0 + a.abs().max(b.abs()).max(c.abs());
    if f(lo) == 0.0 {
        hi = 0.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let y1 = hi;
    // y² + p y + q after deflation
    let p = y1 + a;
    let q = b + p * y1;
    let disc = p * p - 4.0 * q;
    let (y2, y3) = if disc < 0.0 {
        let s = 0.5 * (-disc).sqrt();
        (Complex64::new(-0.5 * p, s), Complex64::new(-0.5 * p, -s))
    } else {
        let r = -0.5 * (p + p.signum() * disc.sqrt());
        let other = if r != 0.0 { q / r } else { 0.0 };
        (Complex64::new(r, 0.0), Complex64::new(other, 0.0))
    };
    let poly = |y: Complex64| ((y + a) * y + b) * y + c;
    let dpoly = |y: Complex64| (3.0 * y + 2.0 * a) * y + b;
    [Complex64::new(y1, 0.0), y2, y3].map(|mut y| {
        for _ in 0..3 {
            let d = dpoly(y);
            if d.norm() == 0.0 {
                break;
            }
            let step = poly(y) / d;
            if !step.re.is_finite() || !step.im.is_finite() {
                break;
            }
            y -= step;
        }
        y
    })
}

/// Retarded Green function of the quantum Langevin equation in the
/// macroscopic limit, sampled on a uniform grid `t_k = k·dt`.
#[derive(Debug, Clone)]
pub struct GreenFunction {
    spectral: SpectralDensity,
    mass: f64,
    omega: f64,
    dt: f64,
    g: Vec<f64>,
    g_dot: Vec<f64>,
    g_ddot: Vec<f64>,
    eta: f64,
}

impl GreenFunction {
    /// Inverts `Ĝ` on `[0, t_max]`.
    ///
    /// The analytic Drude reference carries the poles and the algebraic tail;
    /// the remainder decays fast in frequency and is transformed along
    /// `ℝ + iε`, where `e^{−εP}` bounds the wrap-around from period `P`.
    pub fn new(j: &SpectralDensity, mass: f64, omega: f64, t_max: f64) -> Result<Self> {
        j.check_assumptions()?;
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::InvalidParameter(format!("mass must be positive, got {mass}")));
        }
        if !(omega >= 0.0 && omega.is_finite()) {
            return Err(Error::InvalidParameter(format!("omega must be non-negative, got {omega}")));
        }
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(Error::InvalidParameter(format!("t_max must be positive, got {t_max}")));
        }
        let reference = Reference::new(j, mass, omega);
        let wj = (omega * omega + reference.gamma0 / mass).sqrt();
        let freq_scale = j.scale().max(wj).max(reference.lambda);
        let period = 8.0 * t_max.max(20.0 / freq_scale);
        let eps = 36.0 / period;
        let h = 2.0 * PI / period;
        let nu_max = 400.0 * freq_scale;
        let n = ((nu_max / h).ceil() as usize).next_power_of_two().max(1024);
        if n > 1 << 24 {
            return Err(Error::InvalidParameter(format!(
                "time horizon {t_max} too long relative to frequency scale {freq_scale}"
            )));
        }
        let dt = period / n as f64;

        let spectra: Vec<Result<[Complex64; 3]>> = (0..n)
            .into_par_iter()
            .map(|k| {
                let z = Complex64::new(k as f64 * h, eps);
                let gh = green_hat(j, mass, omega, z)?;
                let r = -(z + Complex64::i() * reference.lambda)
                    / (z * z * z + Complex64::i() * reference.lambda * z * z - wj * wj * z
                        - Complex64::i() * reference.lambda * omega * omega);
                let dg = gh * r * Complex64::i() * z * (j.gamma_hat(z)? - reference.gamma_hat(z)) / mass;
                let w = if k == 0 { 0.5 } else { 1.0 };
                let iz = -Complex64::i() * z;
                Ok([dg * w, dg * iz * w, dg * iz * iz * w])
            })
            .collect();
        let mut cols = [vec![Complex64::new(0.0, 0.0); n], vec![Complex64::new(0.0, 0.0); n], vec![Complex64::new(0.0, 0.0); n]];
        for (k, s) in spectra.into_iter().enumerate() {
            let s = s?;
            for c in 0..3 {
                cols[c][k] = s[c];
            }
        }
        let fft = FftPlanner::new().plan_fft_forward(n);
        for c in cols.iter_mut() {
            fft.process(c);
        }
        let steps = (t_max / dt).ceil() as usize + 2;
        let mut g = Vec::with_capacity(steps + 1);
        let mut g_dot = Vec::with_capacity(steps + 1);
        let mut g_ddot = Vec::with_capacity(steps + 1);
        for k in 0..=steps {
            let t = k as f64 * dt;
            let base = reference.eval(t);
            let amp = (eps * t).exp() * h / PI;
            g.push(base[0] + amp * cols[0][k].re);
            g_dot.push(base[1] + amp * cols[1][k].re);
            g_ddot.push(base[2] + amp * cols[2][k].re);
        }
        let mut out = Self { spectral: j.clone(), mass, omega, dt, g, g_dot, g_ddot, eta: 0.0 };
        out.eta = out.fit_decay_rate().unwrap_or_else(|| reference.decay_rate());
        Ok(out)
    }

    pub fn spectral_density(&self) -> &SpectralDensity {
        &self.spectral
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Last time covered by the grid.
    pub fn t_max(&self) -> f64 {
        (self.g.len() - 1) as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.g.len()).map(|k| k as f64 * self.dt).collect()
    }

    pub fn g(&self) -> &[f64] {
        &self.g
    }

    pub fn g_dot(&self) -> &[f64] {
        &self.g_dot
    }

    pub fn g_ddot(&self) -> &[f64] {
        &self.g_ddot
    }

    /// Exponential decay rate of `G − G(∞)`.
    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// `lim G(t)`: `m/(πJ(0))` for a free particle, zero otherwise.
    pub fn plateau(&self) -> f64 {
        if self.omega == 0.0 {
            self.mass / (PI * self.spectral.j_zero())
        } else {
            0.0
        }
    }

    pub fn g_hat(&self, z: Complex64) -> Result<Complex64> {
        green_hat(&self.spectral, self.mass, self.omega, z)
    }

    /// `(G, Ġ, G̈)(t)`, zero for `t < 0`; Hermite interpolation between nodes.
    pub fn eval(&self, t: f64) -> Result<[f64; 3]> {
        if t < 0.0 {
            return Ok([0.0; 3]);
        }
        let x = t / self.dt;
        let k = x.floor() as usize;
        if k + 1 >= self.g.len() {
            if (t - self.t_max()).abs() <= 1e-12 * self.t_max() {
                let l = self.g.len() - 1;
                return Ok([self.g[l], self.g_dot[l], self.g_ddot[l]]);
            }
            return Err(Error::InvalidParameter(format!("t = {t} beyond the Green-function grid ({})", self.t_max())));
        }
        let s = x - k as f64;
        let h = self.dt;
        let hermite = |y0: f64, y1: f64, d0: f64, d1: f64| {
            let s2 = s * s;
            let s3 = s2 * s;
            (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * h * d0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * h * d1
        };
        let g = hermite(self.g[k], self.g[k + 1], self.g_dot[k], self.g_dot[k + 1]);
        // third derivative from differences of G̈
        let gd = hermite(self.g_dot[k], self.g_dot[k + 1], self.g_ddot[k], self.g_ddot[k + 1]);
        let gdd = self.g_ddot[k] * (1.0 - s) + self.g_ddot[k + 1] * s;
        Ok([g, gd, gdd])
    }

    /// Least-squares slope of the log envelope of `|G − G(∞)|` over the last
    /// decade of the grid.
    fn fit_decay_rate(&self) -> Option<f64> {
        let plateau = self.plateau();
        let t_end = self.t_max();
        let t_start = 0.1 * t_end;
        let windows = 24;
        let width = (t_end - t_start) / windows as f64;
        let peak = self.g.iter().map(|v| (v - plateau).abs()).fold(0.0, f64::max);
        let mut pts = Vec::new();
        for w in 0..windows {
            let a = ((t_start + w as f64 * width) / self.dt) as usize;
            let b = (((t_start + (w + 1) as f64 * width) / self.dt) as usize).min(self.g.len() - 1);
            let m = self.g[a..=b].iter().map(|v| (v - plateau).abs()).fold(0.0, f64::max);
            if m > 1e-9 * peak {
                pts.push((t_start + (w as f64 + 0.5) * width, m.ln()));
            }
        }
        if pts.len() < 6 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let eta = -sxy / sxx;
        (eta.is_finite() && eta > 0.0).then_some(eta)
    }

    /// Writes `t,G,Gdot,Gddot` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "t,G,Gdot,Gddot")?;
        for k in 0..self.g.len() {
            writeln!(f, "{},{},{},{}", k as f64 * self.dt, self.g[k], self.g_dot[k], self.g_ddot[k])?;
        }
        f.flush()?;
        Ok(())
    }
}
