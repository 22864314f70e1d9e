//! Stochastic oracle for the averaged dynamics: exact-discretization sampling
//! of the classical white-noise SDE and of the finite oscillator-plus-bath
//! system with thermal bath data.

use std::io::Write;

use nalgebra::{DMatrix, Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::heat_bath::{beta_eff, BathSpec, NormalModes};
use crate::noise::CovarianceSpec;
use crate::phase_space::{flow_jacobian, QuadraticHamiltonian};
use crate::semigroup::{smearing_covariance, Direction, GaussianMoments};
use crate::{linalg, quad};

/// Trajectories per parallel work unit.
pub const CHUNK: usize = 4096;

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub trajectories: usize,
    /// Output times, strictly increasing and non-negative.
    pub times: Vec<f64>,
    pub seed: u64,
    pub hamiltonian: QuadraticHamiltonian,
    pub noise: CovarianceSpec,
    pub bath: Option<BathSpec>,
    /// Law of the initial system state; a point state has zero covariance.
    pub initial: GaussianMoments,
}

impl SimulationConfig {
    pub fn new(
        trajectories: usize,
        times: Vec<f64>,
        seed: u64,
        hamiltonian: QuadraticHamiltonian,
        noise: CovarianceSpec,
        initial: GaussianMoments,
    ) -> Result<Self> {
        let c = Self { trajectories, times, seed, hamiltonian, noise, bath: None, initial };
        c.validate()?;
        Ok(c)
    }

    pub fn with_bath(mut self, bath: BathSpec) -> Self {
        self.bath = Some(bath);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_trajectories(mut self, trajectories: usize) -> Self {
        self.trajectories = trajectories;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.trajectories < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 trajectories, got {}",
                self.trajectories
            )));
        }
        if self.times.is_empty() {
            return Err(Error::InvalidParameter("time grid is empty".into()));
        }
        for &t in &self.times {
            crate::error::check_time(t)?;
        }
        if self.times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter("time grid must be strictly increasing".into()));
        }
        if self.hamiltonian.dim() != 1 {
            return Err(Error::Dimension(format!(
                "simulated system must have one canonical pair, got {}",
                self.hamiltonian.dim()
            )));
        }
        self.noise.validate()?;
        let cov = self.initial.cov_matrix();
        if linalg::min_eigenvalue_2(&cov) < -1e-12 * cov.abs().max() {
            return Err(Error::InvalidParameter("initial covariance is not positive semidefinite".into()));
        }
        Ok(())
    }
}

/// A sample statistic with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    /// Distance to `target` in units of the standard error.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.value - target) / self.stderr
    }

    /// `|value − target| ≤ k·stderr`, with an absolute slack for zero-variance
    /// estimates.
    pub fn contains(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.stderr + 1e-12 * target.abs().max(1.0)
    }
}

/// Moments of one scalar observable at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObservableMoments {
    pub mean: Estimate,
    /// Raw second moment `⟨x²⟩`.
    pub second: Estimate,
    /// Unbiased variance.
    pub variance: Estimate,
    pub central3: Estimate,
    pub central4: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub times: Vec<f64>,
    pub trajectories: usize,
    pub seed: u64,
    pub p: Vec<ObservableMoments>,
    pub q: Vec<ObservableMoments>,
}

impl MomentEstimate {
    /// Rows `time,observable,estimate,stderr,n_traj,seed`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "time,observable,estimate,stderr,n_traj,seed")?;
        for (k, &t) in self.times.iter().enumerate() {
            for (name, m) in [("p", &self.p[k]), ("q", &self.q[k])] {
                let rows = [
                    ("mean", m.mean),
                    ("second", m.second),
                    ("var", m.variance),
                    ("central3", m.central3),
                    ("central4", m.central4),
                ];
                for (stat, e) in rows {
                    writeln!(
                        w,
                        "{t:.17e},{stat}_{name},{:.17e},{:.17e},{},{}",
                        e.value, e.stderr, self.trajectories, self.seed
                    )?;
                }
            }
        }
        Ok(())
    }
}

/// Power sums `Σ yᵏ`, `k = 0..=8`, of shifted samples.
#[derive(Debug, Clone, Copy, Default)]
struct PowerSums([f64; 9]);

impl PowerSums {
    fn push(&mut self, y: f64) {
        let mut v = 1.0;
        for s in self.0.iter_mut() {
            *s += v;
            v *= y;
        }
    }

    fn merge(&mut self, o: &PowerSums) {
        for (a, b) in self.0.iter_mut().zip(o.0.iter()) {
            *a += b;
        }
    }

    fn finish(&self, shift: f64) -> ObservableMoments {
        let n = self.0[0];
        let a: Vec<f64> = self.0.iter().map(|s| s / n).collect();
        let central = shifted(&a, -a[1]);
        let raw = shifted(&a, shift);
        let mu = |k: usize| central[k];
        let se = |v: f64| (v.max(0.0) / n).sqrt();
        ObservableMoments {
            mean: Estimate { value: shift + a[1], stderr: se(mu(2)) },
            second: Estimate { value: raw[2], stderr: se(raw[4] - raw[2] * raw[2]) },
            variance: Estimate { value: mu(2) * n / (n - 1.0), stderr: se(mu(4) - mu(2) * mu(2)) },
            central3: Estimate {
                value: mu(3),
                stderr: se(mu(6) - mu(3) * mu(3) - 6.0 * mu(2) * mu(4) + 9.0 * mu(2).powi(3)),
            },
            central4: Estimate {
                value: mu(4),
                stderr: se(mu(8) - mu(4) * mu(4) - 8.0 * mu(3) * mu(5) + 16.0 * mu(3) * mu(3) * mu(2)),
            },
        }
    }
}

/// Moments of `y + c` from the raw moments `a` of `y`.
fn shifted(a: &[f64], c: f64) -> Vec<f64> {
    (0..a.len())
        .map(|j| {
            let mut binom = 1.0;
            let mut acc = 0.0;
            for i in (0..=j).rev() {
                acc += binom * a[i] * c.powi((j - i) as i32);
                binom *= i as f64 / (j - i + 1) as f64;
            }
            acc
        })
        .collect()
}

fn rng_for(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Runs `sample` on every trajectory index and reduces the power sums in a
/// fixed order. `sample` writes one `(p, q)` pair per output time.
fn accumulate<F>(config: &SimulationConfig, shifts: &[[f64; 2]], sample: F) -> MomentEstimate
where
    F: Fn(&mut ChaCha8Rng, &mut [[f64; 2]]) + Sync,
{
    let nt = config.times.len();
    let chunks = config.trajectories.div_ceil(CHUNK);
    let partial: Vec<Vec<PowerSums>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut sums = vec![PowerSums::default(); 2 * nt];
            let mut out = vec![[0.0; 2]; nt];
            for i in c * CHUNK..((c + 1) * CHUNK).min(config.trajectories) {
                let mut rng = rng_for(config.seed, i);
                sample(&mut rng, &mut out);
                for (k, z) in out.iter().enumerate() {
                    sums[2 * k].push(z[0] - shifts[k][0]);
                    sums[2 * k + 1].push(z[1] - shifts[k][1]);
                }
            }
            sums
        })
        .collect();
    let total = pairwise(partial);
    MomentEstimate {
        times: config.times.clone(),
        trajectories: config.trajectories,
        seed: config.seed,
        p: (0..nt).map(|k| total[2 * k].finish(shifts[k][0])).collect(),
        q: (0..nt).map(|k| total[2 * k + 1].finish(shifts[k][1])).collect(),
    }
}

fn pairwise(mut parts: Vec<Vec<PowerSums>>) -> Vec<PowerSums> {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                a.iter_mut().zip(b.iter()).for_each(|(x, y)| x.merge(y));
            }
            next.push(a);
        }
        parts = next;
    }
    parts.pop().unwrap_or_default()
}

/// Per-step flow and noise factor of the classical SDE.
struct ClassicalSteps {
    initial: Matrix2<f64>,
    steps: Vec<(Matrix2<f64>, Matrix2<f64>)>,
}

impl ClassicalSteps {
    fn new(config: &SimulationConfig) -> Result<Self> {
        config.validate()?;
        let h = &config.hamiltonian;
        let d = config.noise.diffusion_matrix();
        let mut steps = Vec::with_capacity(config.times.len());
        let mut prev = 0.0;
        for &t in &config.times {
            let dt = t - prev;
            prev = t;
            let j = linalg::to_matrix2(&flow_jacobian(h, dt)?.matrix);
            let c = smearing_covariance(h, &d, dt, Direction::Observable)?.matrix;
            steps.push((j, factor2(&c)));
        }
        Ok(Self { initial: factor2(&config.initial.cov_matrix()), steps })
    }

    fn run(&self, mean: Vector2<f64>, rng: &mut ChaCha8Rng, out: &mut [[f64; 2]]) {
        let mut z = mean + self.initial * Vector2::new(normal(rng), normal(rng));
        for ((j, l), o) in self.steps.iter().zip(out.iter_mut()) {
            z = j * z + l * Vector2::new(normal(rng), normal(rng));
            *o = [z[0], z[1]];
        }
    }
}

fn factor2(c: &Matrix2<f64>) -> Matrix2<f64> {
    let d = DMatrix::from_row_slice(2, 2, c.as_slice());
    linalg::to_matrix2(&linalg::psd_factor(&d))
}

/// Samples `dz = X_H dt + dW` with white noise of covariance `2D dt`, updating
/// each trajectory exactly between output times.
pub fn simulate_classical(config: &SimulationConfig) -> Result<MomentEstimate> {
    let steps = ClassicalSteps::new(config)?;
    let mean = config.initial.mean_vector();
    let mut shifts = Vec::with_capacity(config.times.len());
    for &t in &config.times {
        let m = linalg::to_matrix2(&flow_jacobian(&config.hamiltonian, t)?.matrix) * mean;
        shifts.push([m[0], m[1]]);
    }
    Ok(accumulate(config, &shifts, |rng, out| steps.run(mean, rng, out)))
}

/// The `(p, q)` path of trajectory `index` at the output times, as sampled by
/// [`simulate_classical`].
pub fn classical_trajectory(config: &SimulationConfig, index: usize) -> Result<Vec<[f64; 2]>> {
    let steps = ClassicalSteps::new(config)?;
    let mut out = vec![[0.0; 2]; config.times.len()];
    steps.run(config.initial.mean_vector(), &mut rng_for(config.seed, index), &mut out);
    Ok(out)
}

/// Linear maps from the initial total-system state and from the noise to the
/// system `(p, q)` at every output time.
struct TotalSystemMaps {
    /// Row-major `[time][p|q][coordinate]`, coordinates ordered
    /// `p_sys, q_sys, then (p_j, q_j)` per bath oscillator.
    rows: Vec<f64>,
    dim: usize,
    bath_sd: Vec<[f64; 2]>,
    initial: Matrix2<f64>,
    noise: DMatrix<f64>,
}

impl TotalSystemMaps {
    fn new(config: &SimulationConfig, bath: &BathSpec, beta: f64, hbar: f64) -> Result<Self> {
        let modes = bath.normal_modes();
        let m = bath.mass;
        let n = bath.n();
        let dim = 2 * (n + 1);
        let mut rows = Vec::with_capacity(2 * dim * config.times.len());
        for &t in &config.times {
            let mut rp = vec![0.0; dim];
            let mut rq = vec![0.0; dim];
            if t == 0.0 {
                rp[0] = 1.0;
                rq[1] = 1.0;
            } else {
                let c = modes.system_row(|r| (r * t).cos());
                let s = modes.system_row(|r| sin_over(r, t));
                let ws = modes.system_row(|r| -r * (r * t).sin());
                for l in 0..=n {
                    let ml = if l == 0 { m } else { bath.masses[l - 1] };
                    rp[2 * l] = c[l] * (m / ml).sqrt();
                    rp[2 * l + 1] = ws[l] * (m * ml).sqrt();
                    rq[2 * l] = s[l] / (m * ml).sqrt();
                    rq[2 * l + 1] = c[l] * (ml / m).sqrt();
                }
            }
            rows.extend(rp);
            rows.extend(rq);
        }
        let bath_sd = (0..n)
            .map(|j| {
                let (mj, wj) = (bath.masses[j], bath.frequencies[j]);
                let be = beta_eff(hbar * wj, beta);
                [(mj / be).sqrt(), 1.0 / (wj * (mj * be).sqrt())]
            })
            .collect();
        let d0 = crate::heat_bath::position_force_strength(&config.noise)?;
        let noise = if d0 == 0.0 {
            DMatrix::zeros(2 * config.times.len(), 2 * config.times.len())
        } else {
            let mut l = linalg::psd_factor(&(noise_covariance(&modes, m, &config.times) * d0));
            for (k, &t) in config.times.iter().enumerate() {
                if t == 0.0 {
                    l.row_mut(2 * k).fill(0.0);
                    l.row_mut(2 * k + 1).fill(0.0);
                }
            }
            l
        };
        Ok(Self { rows, dim, bath_sd, initial: factor2(&config.initial.cov_matrix()), noise })
    }

    fn run(&self, mean: Vector2<f64>, rng: &mut ChaCha8Rng, state: &mut [f64], xi: &mut [f64], out: &mut [[f64; 2]]) {
        let sys = mean + self.initial * Vector2::new(normal(rng), normal(rng));
        state[0] = sys[0];
        state[1] = sys[1];
        for (j, sd) in self.bath_sd.iter().enumerate() {
            state[2 + 2 * j] = sd[0] * normal(rng);
            state[3 + 2 * j] = sd[1] * normal(rng);
        }
        for x in xi.iter_mut() {
            *x = normal(rng);
        }
        for (k, o) in out.iter_mut().enumerate() {
            let rp = &self.rows[2 * k * self.dim..(2 * k + 1) * self.dim];
            let rq = &self.rows[(2 * k + 1) * self.dim..(2 * k + 2) * self.dim];
            let mut p = dot(rp, state);
            let mut q = dot(rq, state);
            p += dot_col(&self.noise, 2 * k, xi);
            q += dot_col(&self.noise, 2 * k + 1, xi);
            *o = [p, q];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dot_col(l: &DMatrix<f64>, row: usize, xi: &[f64]) -> f64 {
    (0..l.ncols()).map(|c| l[(row, c)] * xi[c]).sum()
}

fn sin_over(r: f64, s: f64) -> f64 {
    if (r * s).abs() < 1e-8 {
        s
    } else {
        (r * s).sin() / r
    }
}

/// Joint covariance of `∫₀ᵗ (Ġ(t−s), G(t−s)/m) dW(s)` over the output times
/// for unit force strength, by composite Gauss–Legendre quadrature.
fn noise_covariance(modes: &NormalModes, mass: f64, times: &[f64]) -> DMatrix<f64> {
    const ORDER: usize = 16;
    let nt = times.len();
    let omega_max = modes.frequencies().into_iter().fold(0.0, f64::max);
    let width = if omega_max > 0.0 { (std::f64::consts::PI / omega_max).min(1.0) } else { 1.0 };
    let (x, w) = quad::gauss_legendre(ORDER);
    let mut cov = DMatrix::zeros(2 * nt, 2 * nt);
    let mut lo = 0.0;
    for (k, &hi) in times.iter().enumerate() {
        let panels = ((hi - lo) / width).ceil().max(1.0) as usize;
        let h = (hi - lo) / panels as f64;
        // kernels at s are needed for every output time t_i ≥ hi
        let nodes: Vec<(f64, f64)> = (0..panels)
            .flat_map(|p| {
                let a = lo + p as f64 * h;
                x.iter().zip(&w).map(move |(&xi, &wi)| (a + 0.5 * h * (xi + 1.0), 0.5 * h * wi))
            })
            .collect();
        if hi > lo {
            let block = nodes
                .par_iter()
                .map(|&(s, ws)| {
                    let kern: Vec<f64> = times[k..]
                        .iter()
                        .flat_map(|&t| {
                            let f = modes.system_functions(t - s);
                            [f.cos, f.sin_over / mass]
                        })
                        .collect();
                    let len = kern.len();
                    let mut acc = DMatrix::zeros(len, len);
                    for a in 0..len {
                        for b in a..len {
                            acc[(a, b)] = ws * kern[a] * kern[b];
                        }
                    }
                    acc
                })
                .reduce(|| DMatrix::zeros(2 * (nt - k), 2 * (nt - k)), |a, b| a + b);
            for a in 0..block.nrows() {
                for b in a..block.ncols() {
                    let v = block[(a, b)];
                    cov[(2 * k + a, 2 * k + b)] += v;
                    if a != b {
                        cov[(2 * k + b, 2 * k + a)] += v;
                    }
                }
            }
        }
        lo = hi;
    }
    cov
}

/// Samples the oscillator coupled to the finite bath of `config.bath`, with
/// the bath drawn from the thermal law at effective temperatures and the
/// position-only noise acting on the system momentum.
pub fn simulate_total_system(config: &SimulationConfig, beta: f64, hbar: f64) -> Result<MomentEstimate> {
    config.validate()?;
    let bath = config
        .bath
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("total-system simulation needs a bath".into()))?;
    bath.validate()?;
    if bath.n() == 0 {
        return Err(Error::InvalidParameter("bath has no oscillators".into()));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
    }
    if !(hbar >= 0.0 && hbar.is_finite()) {
        return Err(Error::InvalidParameter(format!("hbar must be non-negative, got {hbar}")));
    }
    let (hpp, hpq, hqq) = config.hamiltonian.curvature()?;
    let (m, w) = (bath.mass, bath.omega);
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300);
    if !(close(hpp, 1.0 / m) && hpq == 0.0 && (close(hqq, m * w * w) || hqq == 0.0 && w == 0.0)) {
        return Err(Error::InvalidParameter(
            "hamiltonian does not match the bath's system mass and frequency".into(),
        ));
    }
    let maps = TotalSystemMaps::new(config, bath, beta, hbar)?;
    let mean = config.initial.mean_vector();
    let shifts: Vec<[f64; 2]> = (0..config.times.len())
        .map(|k| {
            let rp = &maps.rows[2 * k * maps.dim..];
            let rq = &maps.rows[(2 * k + 1) * maps.dim..];
            [rp[0] * mean[0] + rp[1] * mean[1], rq[0] * mean[0] + rq[1] * mean[1]]
        })
        .collect();
    let nt = config.times.len();
    Ok(accumulate(config, &shifts, |rng, out| {
        let mut state = vec![0.0; maps.dim];
        let mut xi = vec![0.0; 2 * nt];
        maps.run(mean, rng, &mut state, &mut xi, out)
    }))
}
