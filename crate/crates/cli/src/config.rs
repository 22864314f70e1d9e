use std::path::PathBuf;

use avgdyn::{CovarianceSpec, Error, GaussianMoments, QuadraticHamiltonian, Result, SpectralDensity, ThermalMethod};
use serde::Deserialize;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[allow(dead_code)]
    schema_version: u32,
    experiment: String,
    params: serde_json::Value,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "experiment", content = "params", rename_all = "kebab-case")]
pub enum Experiment {
    Moments(MomentsParams),
    EvolveWigner(EvolveParams),
    Mc(McParams),
    BathGreen(GreenParams),
    Thermal(ThermalParams),
    Longtime(LongtimeParams),
    Convergence(ConvergenceParams),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Moments(_) => "moments",
            Experiment::EvolveWigner(_) => "evolve-wigner",
            Experiment::Mc(_) => "mc",
            Experiment::BathGreen(_) => "bath-green",
            Experiment::Thermal(_) => "thermal",
            Experiment::Longtime(_) => "longtime",
            Experiment::Convergence(_) => "convergence",
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HamiltonianConfig {
    Free { mass: f64 },
    Harmonic { mass: f64, omega: f64 },
    /// `H = ½(h_pp p² + 2h_pq pq + h_qq q²)`.
    General { h_pp: f64, h_pq: f64, h_qq: f64 },
}

impl HamiltonianConfig {
    pub fn build(&self, hbar: f64) -> Result<QuadraticHamiltonian> {
        match *self {
            HamiltonianConfig::Free { mass } => QuadraticHamiltonian::free(mass, hbar),
            HamiltonianConfig::Harmonic { mass, omega } => QuadraticHamiltonian::harmonic(mass, omega, hbar),
            HamiltonianConfig::General { h_pp, h_pq, h_qq } => QuadraticHamiltonian::one_dof(h_pp, h_pq, h_qq, hbar),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    Point { p: f64, q: f64 },
    Coherent { p: f64, q: f64, sigma_q: f64 },
    Gaussian { mean: [f64; 2], cov: [[f64; 2]; 2] },
}

impl InitialConfig {
    pub fn build(&self, hbar: f64) -> Result<GaussianMoments> {
        let m = match *self {
            InitialConfig::Point { p, q } => GaussianMoments::point(p, q),
            InitialConfig::Coherent { p, q, sigma_q } => {
                positive("sigma_q", sigma_q)?;
                positive("hbar", hbar)?;
                GaussianMoments::coherent(p, q, sigma_q, hbar)
            }
            InitialConfig::Gaussian { mean, cov } => {
                let [[a, b], [c, d]] = cov;
                if b != c || a < 0.0 || d < 0.0 || a * d < b * b {
                    return Err(Error::InvalidParameter("initial covariance must be symmetric and PSD".into()));
                }
                GaussianMoments { mean, cov }
            }
        };
        Ok(m)
    }
}

pub fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

pub fn non_negative(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be non-negative, got {v}")))
    }
}

fn times_ok(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidParameter("times must not be empty".into()));
    }
    for &t in times {
        non_negative("time", t)?;
    }
    if times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidParameter("times must be strictly increasing".into()));
    }
    Ok(())
}

fn spectral_ok(j: &SpectralDensity) -> Result<()> {
    j.check_assumptions()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentsParams {
    pub hamiltonian: HamiltonianConfig,
    pub noise: CovarianceSpec,
    pub initial: InitialConfig,
    pub times: Vec<f64>,
    pub trajectories: usize,
    #[serde(default = "one")]
    pub hbar: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub np: usize,
    pub nq: usize,
    pub half_p: f64,
    pub half_q: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveParams {
    pub hamiltonian: HamiltonianConfig,
    pub noise: CovarianceSpec,
    /// Gaussian initial state; `hbar = 0` selects the classical evolution.
    pub initial: InitialConfig,
    pub grid: GridConfig,
    pub times: Vec<f64>,
    #[serde(default = "one")]
    pub hbar: f64,
    /// Also write the final grid.
    #[serde(default)]
    pub write_grid: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathConfig {
    pub spectral: SpectralDensity,
    pub n: usize,
    #[serde(default)]
    pub cutoff: Option<f64>,
    pub beta: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McParams {
    pub hamiltonian: HamiltonianConfig,
    pub noise: CovarianceSpec,
    pub initial: InitialConfig,
    pub times: Vec<f64>,
    pub trajectories: usize,
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(default)]
    pub bath: Option<BathConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreenParams {
    pub spectral: SpectralDensity,
    pub mass: f64,
    pub omega: f64,
    pub t_max: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalParams {
    pub spectral: SpectralDensity,
    pub mass: f64,
    pub omega: f64,
    pub betas: Vec<f64>,
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(default = "all_methods")]
    pub methods: Vec<ThermalMethod>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitWindow {
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LongtimeParams {
    pub spectral: SpectralDensity,
    pub noise: CovarianceSpec,
    pub mass: f64,
    pub omega: f64,
    pub beta: f64,
    #[serde(default = "one")]
    pub hbar: f64,
    /// Fit the reduced `⟨q²⟩_t` over this window (needs `omega = 0`).
    #[serde(default)]
    pub fit: Option<FitWindow>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceParams {
    pub spectral: SpectralDensity,
    pub mass: f64,
    pub omega: f64,
    pub sizes: Vec<usize>,
    pub t_max: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn one() -> f64 {
    1.0
}

fn all_methods() -> Vec<ThermalMethod> {
    ThermalMethod::ALL.to_vec()
}

fn default_samples() -> usize {
    401
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: serde_json::Value = serde_json::from_str(text)?;
        match raw.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == SCHEMA_VERSION as u64 => {}
            Some(v) => {
                return Err(Error::InvalidParameter(format!(
                    "unsupported schema_version {v}, expected {SCHEMA_VERSION}"
                )))
            }
            None => return Err(Error::InvalidParameter("missing schema_version".into())),
        }
        let raw: RawConfig = serde_json::from_value(raw)?;
        let tagged = serde_json::json!({ "experiment": raw.experiment, "params": raw.params });
        let cfg = Self { experiment: serde_json::from_value(tagged)?, seed: raw.seed, output: raw.output };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every physical parameter without running anything.
    pub fn validate(&self) -> Result<()> {
        match &self.experiment {
            Experiment::Moments(p) => {
                p.hamiltonian.build(p.hbar)?;
                p.noise.validate()?;
                p.initial.build(p.hbar)?;
                times_ok(&p.times)?;
                trajectories_ok(p.trajectories)?;
                non_negative("hbar", p.hbar)
            }
            Experiment::EvolveWigner(p) => {
                p.hamiltonian.build(p.hbar)?;
                p.noise.validate()?;
                p.initial.build(p.hbar)?;
                times_ok(&p.times)?;
                positive("grid.half_p", p.grid.half_p)?;
                positive("grid.half_q", p.grid.half_q)?;
                if p.grid.np < 4 || p.grid.nq < 4 {
                    return Err(Error::InvalidParameter("grid needs at least 4 points per axis".into()));
                }
                non_negative("hbar", p.hbar)
            }
            Experiment::Mc(p) => {
                p.hamiltonian.build(p.hbar)?;
                p.noise.validate()?;
                p.initial.build(p.hbar)?;
                times_ok(&p.times)?;
                trajectories_ok(p.trajectories)?;
                non_negative("hbar", p.hbar)?;
                if let Some(b) = &p.bath {
                    spectral_ok(&b.spectral)?;
                    positive("bath.beta", b.beta)?;
                    if b.n == 0 {
                        return Err(Error::InvalidParameter("bath.n must be at least 1".into()));
                    }
                    if let Some(c) = b.cutoff {
                        positive("bath.cutoff", c)?;
                    }
                    let (mass, omega) = match p.hamiltonian {
                        HamiltonianConfig::Free { mass } => (mass, 0.0),
                        HamiltonianConfig::Harmonic { mass, omega } => (mass, omega),
                        HamiltonianConfig::General { .. } => {
                            return Err(Error::InvalidParameter(
                                "a bath needs a free or harmonic system hamiltonian".into(),
                            ))
                        }
                    };
                    positive("mass", mass)?;
                    non_negative("omega", omega)?;
                }
                Ok(())
            }
            Experiment::BathGreen(p) => {
                spectral_ok(&p.spectral)?;
                positive("mass", p.mass)?;
                non_negative("omega", p.omega)?;
                positive("t_max", p.t_max)
            }
            Experiment::Thermal(p) => {
                spectral_ok(&p.spectral)?;
                positive("mass", p.mass)?;
                positive("omega", p.omega)?;
                non_negative("hbar", p.hbar)?;
                if p.betas.is_empty() || p.methods.is_empty() {
                    return Err(Error::InvalidParameter("betas and methods must not be empty".into()));
                }
                p.betas.iter().try_for_each(|&b| positive("beta", b))
            }
            Experiment::Longtime(p) => {
                spectral_ok(&p.spectral)?;
                p.noise.validate()?;
                positive("mass", p.mass)?;
                non_negative("omega", p.omega)?;
                positive("beta", p.beta)?;
                non_negative("hbar", p.hbar)?;
                if let Some(f) = &p.fit {
                    if p.omega != 0.0 {
                        return Err(Error::InvalidParameter("the diffusion fit needs omega = 0".into()));
                    }
                    non_negative("fit.start", f.start)?;
                    if !(f.end > f.start) || f.points < 2 {
                        return Err(Error::InvalidParameter("fit window needs end > start and ≥ 2 points".into()));
                    }
                }
                Ok(())
            }
            Experiment::Convergence(p) => {
                spectral_ok(&p.spectral)?;
                positive("mass", p.mass)?;
                non_negative("omega", p.omega)?;
                positive("t_max", p.t_max)?;
                if p.sizes.is_empty() || p.sizes.contains(&0) || p.samples < 2 {
                    return Err(Error::InvalidParameter("sizes must be non-empty and positive, samples ≥ 2".into()));
                }
                Ok(())
            }
        }
    }
}

fn trajectories_ok(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 trajectories, got {n}")));
    }
    Ok(())
}
