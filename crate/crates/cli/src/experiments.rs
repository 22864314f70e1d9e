use std::fmt::Write as _;

use avgdyn::heat_bath::{default_cutoff, InequalityChain};
use avgdyn::semigroup::{free_q4_gaussian, GridGeometry};
use avgdyn::*;

use crate::config::*;

/// One CSV file: its name, what it reproduces, and the body below the
/// provenance header.
pub struct Artifact {
    pub file: String,
    pub target: String,
    pub body: String,
}

fn csv(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    out
}

pub fn run(cfg: &ExperimentConfig) -> Result<Vec<Artifact>> {
    match &cfg.experiment {
        Experiment::Moments(p) => moments(p, cfg.seed),
        Experiment::EvolveWigner(p) => evolve(p),
        Experiment::Mc(p) => mc(p, cfg.seed),
        Experiment::BathGreen(p) => green(p),
        Experiment::Thermal(p) => thermal(p),
        Experiment::Longtime(p) => longtime(p),
        Experiment::Convergence(p) => convergence(p),
    }
}

fn moments(p: &MomentsParams, seed: u64) -> Result<Vec<Artifact>> {
    let h = p.hamiltonian.build(p.hbar)?;
    let init = p.initial.build(p.hbar)?;
    let d = p.noise.diffusion_matrix();
    let cfg = SimulationConfig::new(p.trajectories, p.times.clone(), seed, h.clone(), p.noise.clone(), init)?;
    let est = simulate_classical(&cfg)?;
    let mut rows = Vec::new();
    for (k, &t) in p.times.iter().enumerate() {
        let s = propagate_moments(&h, &d, &init, t)?;
        let (ep, eq) = (&est.p[k], &est.q[k]);
        for (name, exact, e) in [
            ("mean_p", s.p, ep.mean),
            ("mean_q", s.q, eq.mean),
            ("second_p", s.p2, ep.second),
            ("second_q", s.q2, eq.second),
            ("var_p", s.var_p(), ep.variance),
            ("var_q", s.var_q(), eq.variance),
        ] {
            rows.push(format!(
                "{t},{name},{exact},{},{},{},{},{seed}",
                e.value,
                e.stderr,
                e.z_score(exact),
                p.trajectories
            ));
        }
    }
    Ok(vec![Artifact {
        file: "moments.csv".into(),
        target: "exact first and second moments of the averaged dynamics (mean carried by the flow, second \
                 moments plus the smearing covariance; for a free particle Var p grows as 2 D02 t and Var q \
                 as 2 D02 t^3 / 3m^2) against exact-step Monte Carlo"
            .into(),
        body: csv("time,observable,analytic,estimate,stderr,z,n_traj,seed", rows),
    }])
}

fn evolve(p: &EvolveParams) -> Result<Vec<Artifact>> {
    let h = p.hamiltonian.build(p.hbar)?;
    let init = p.initial.build(p.hbar)?;
    let geo = GridGeometry::symmetric(p.grid.np, p.grid.nq, p.grid.half_p, p.grid.half_q)?;
    let classical = p.hbar == 0.0;
    let mut w = WignerGrid::gaussian(geo, p.hbar, init.mean, init.cov_matrix())?;
    if classical {
        w = w.as_classical();
    }
    let d = p.noise.diffusion_matrix();
    let q4_exact = match p.hamiltonian {
        HamiltonianConfig::Free { mass } => Some((mass, p.noise.curvature_table(4))),
        _ => None,
    };
    let mut rows = Vec::new();
    let mut now = 0.0;
    for &t in &p.times {
        let dt = t - now;
        w = if classical { classical_evolve(&w, &h, &d, dt)? } else { evolve_wigner(&w, &h, &p.noise, dt)? };
        now = t;
        let (mean, cov) = w.moments();
        let q4 = w.expectation(|_, q| q.powi(4));
        let exact = match &q4_exact {
            Some((mass, table)) => free_q4_gaussian(*mass, table, p.hbar, &init, t)?.to_string(),
            None => String::new(),
        };
        rows.push(format!(
            "{t},{},{},{},{},{},{},{},{q4},{exact},{}",
            w.mass(),
            w.purity(),
            w.bg_entropy(),
            mean[0],
            mean[1],
            cov[(0, 0)],
            cov[(1, 1)],
            w.edge_mass(2)
        ));
    }
    let mut out = vec![Artifact {
        file: "evolve_wigner.csv".into(),
        target: "averaged evolution of a sampled Wigner function (smearing by the noise measure, then transport \
                 along the flow); purity should not increase and, for a free particle, <q^4> should match the \
                 closed form with its 2 hbar^2 d4(t) term"
            .into(),
        body: csv("time,mass,purity,entropy,mean_p,mean_q,var_p,var_q,q4,q4_closed_form,edge_mass", rows),
    }];
    if p.write_grid {
        let g = &w.geometry;
        let mut body = String::from("p,q,w\n");
        for i in 0..g.np {
            for j in 0..g.nq {
                let _ = writeln!(body, "{},{},{}", g.p(i), g.q(j), w.get(i, j));
            }
        }
        out.push(Artifact {
            file: "wigner_final.csv".into(),
            target: "Wigner function at the last requested time".into(),
            body,
        });
    }
    Ok(out)
}

fn mc(p: &McParams, seed: u64) -> Result<Vec<Artifact>> {
    let h = p.hamiltonian.build(p.hbar)?;
    let init = p.initial.build(p.hbar)?;
    let cfg = SimulationConfig::new(p.trajectories, p.times.clone(), seed, h, p.noise.clone(), init)?;
    let (est, target) = match &p.bath {
        None => (
            simulate_classical(&cfg)?,
            "moments of the classical white-noise Langevin equation by exact one-step Gaussian updates",
        ),
        Some(b) => {
            let (mass, omega) = match p.hamiltonian {
                HamiltonianConfig::Free { mass } => (mass, 0.0),
                HamiltonianConfig::Harmonic { mass, omega } => (mass, omega),
                HamiltonianConfig::General { .. } => unreachable!("rejected by validation"),
            };
            let cutoff = b.cutoff.unwrap_or_else(|| default_cutoff(&b.spectral, b.n));
            let bath = discretize_bath(&b.spectral, b.n, cutoff, mass, omega)?;
            (
                simulate_total_system(&cfg.with_bath(bath), b.beta, p.hbar)?,
                "system moments of the oscillator coupled to a finite harmonic bath, bath drawn at the effective \
                 temperatures 1/beta_eff(hbar omega_j)",
            )
        }
    };
    let mut body = Vec::new();
    est.write_csv(&mut body)?;
    Ok(vec![Artifact {
        file: "mc.csv".into(),
        target: target.into(),
        body: String::from_utf8(body).expect("csv is utf-8"),
    }])
}

fn green(p: &GreenParams) -> Result<Vec<Artifact>> {
    let gf = GreenFunction::new(&p.spectral, p.mass, p.omega, p.t_max)?;
    let rows = gf
        .times()
        .iter()
        .zip(gf.g())
        .zip(gf.g_dot())
        .zip(gf.g_ddot())
        .map(|(((t, g), gd), gdd)| format!("{t},{g},{gd},{gdd}"))
        .collect::<Vec<_>>();
    let summary = vec![
        format!("eta,{}", gf.eta()),
        format!("plateau,{}", gf.plateau()),
        format!("gamma_zero,{}", p.spectral.gamma_zero()),
    ];
    Ok(vec![
        Artifact {
            file: "green.csv".into(),
            target: "retarded Green function G of the quantum Langevin equation with G(0)=0, G'(0)=1, and its \
                     first two derivatives"
                .into(),
            body: csv("t,G,Gdot,Gddot", rows),
        },
        Artifact {
            file: "green_summary.csv".into(),
            target: "relaxation rate of G and its plateau (m / pi J(0) when omega = 0, else 0)".into(),
            body: csv("quantity,value", summary),
        },
    ])
}

fn thermal(p: &ThermalParams) -> Result<Vec<Artifact>> {
    let mut rows = Vec::new();
    for &beta in &p.betas {
        for &method in &p.methods {
            let v = thermal_values(&p.spectral, p.mass, p.omega, beta, p.hbar, method)?;
            let c = InequalityChain::new(&p.spectral, p.mass, p.omega, beta, p.hbar, &v);
            let name = serde_json::to_value(method)?.as_str().unwrap_or_default().to_string();
            rows.push(format!(
                "{beta},{name},{},{},{},{},{},{},{},{}",
                v.p2,
                v.q2,
                c.lower,
                c.potential,
                c.middle,
                c.kinetic,
                c.upper,
                c.holds(1e-9)
            ));
        }
    }
    Ok(vec![Artifact {
        file: "thermal.csv".into(),
        target: "equilibrium <p^2> and <q^2> of the damped oscillator by spectral integral, principal-value \
                 integral and Matsubara sum, with the chain of energy inequalities"
            .into(),
        body: csv("beta,method,p2,q2,chain_lower,potential,middle,kinetic,upper,chain_holds", rows),
    }])
}

fn longtime(p: &LongtimeParams) -> Result<Vec<Artifact>> {
    let lim = longtime_limits(&p.spectral, &p.noise, p.mass, p.omega, p.beta, p.hbar)?;
    let mut rows = vec![format!("p2_limit,{}", lim.p2), format!("p2_noise,{}", lim.p2_noise)];
    if let Some(q2) = lim.q2 {
        rows.push(format!("q2_limit,{q2}"));
    }
    if let Some(q) = lim.q2_noise {
        rows.push(format!("q2_noise,{q}"));
    }
    if let Some(dc) = lim.diffusion_constant {
        rows.push(format!("diffusion_constant,{dc}"));
    }
    if let Some(f) = &p.fit {
        let dynamics = ReducedDynamics::new(&p.spectral, &p.noise, p.mass, p.omega, p.beta, p.hbar, f.end)?;
        let start = GaussianMoments::point(0.0, 0.0);
        let ts: Vec<f64> =
            (0..f.points).map(|k| f.start + (f.end - f.start) * k as f64 / (f.points - 1) as f64).collect();
        let mut q2 = Vec::with_capacity(ts.len());
        for &t in &ts {
            q2.push(dynamics.moments(&start, t)?.q2);
        }
        rows.push(format!("fitted_diffusion_constant,{}", slope(&ts, &q2)));
    }
    Ok(vec![Artifact {
        file: "longtime.csv".into(),
        target: "long-time limits of the reduced moments (thermal value plus the noise heating through the \
                 Parseval norms of G); for omega = 0 the diffusion constant of <q^2>, 2/(pi J(0)) (1/beta + \
                 D0/(2 pi J(0)))"
            .into(),
        body: csv("quantity,value", rows),
    }])
}

fn convergence(p: &ConvergenceParams) -> Result<Vec<Artifact>> {
    let gf = GreenFunction::new(&p.spectral, p.mass, p.omega, p.t_max)?;
    let mut rows = Vec::new();
    for &n in &p.sizes {
        let cutoff = default_cutoff(&p.spectral, n);
        let modes = discretize_bath(&p.spectral, n, cutoff, p.mass, p.omega)?.normal_modes();
        let (mut eg, mut egd) = (0.0f64, 0.0f64);
        for k in 0..p.samples {
            let s = p.t_max * k as f64 / (p.samples - 1) as f64;
            let f = modes.system_functions(s);
            let [g, gd, _] = gf.eval(s)?;
            eg = eg.max((f.sin_over - g).abs());
            egd = egd.max((f.cos - gd).abs());
        }
        let recurrence = 2.0 * std::f64::consts::PI * n as f64 / cutoff;
        rows.push(format!("{n},{cutoff},{recurrence},{eg},{egd}"));
    }
    Ok(vec![Artifact {
        file: "convergence.csv".into(),
        target: "sup-norm distance on [0, t_max] between the finite-bath Green function and the macroscopic one, \
                 by bath size; windows longer than the recurrence time 2 pi n / cutoff are not expected to converge"
            .into(),
        body: csv("n,cutoff,recurrence_time,sup_err_G,sup_err_Gdot", rows),
    }])
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
