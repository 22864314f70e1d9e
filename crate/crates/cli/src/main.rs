//! `avgdyn` experiment runner.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod experiments;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;
use sha2::{Digest, Sha256};

use config::ExperimentConfig;

/// Worker-count cap for the thread pool.
const THREADS_ENV: &str = "AVGDYN_THREADS";

#[derive(Parser)]
#[command(name = "avgdyn", version, about = "Noise-averaged phase-space dynamics experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its CSV artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; overrides the config's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config against the schema and parameter constraints.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

struct Failure {
    kind: &'static str,
    message: String,
    code: u8,
}

impl Failure {
    fn config(e: avgdyn::Error) -> Self {
        let kind = match e {
            avgdyn::Error::Json(_) => "schema",
            _ => e.kind(),
        };
        Self { kind, message: e.to_string(), code: 2 }
    }

    fn runtime(e: avgdyn::Error) -> Self {
        let code = if matches!(e, avgdyn::Error::AssumptionViolation(_)) { 2 } else { 1 };
        Self { kind: e.kind(), message: e.to_string(), code }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self { kind: "io", message: format!("{}: {e}", path.display()), code: 1 }
    }
}

fn load(path: &Path) -> Result<(ExperimentConfig, Vec<u8>), Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::io(path, e))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| Failure { kind: "schema", message: "config is not valid UTF-8".into(), code: 2 })?;
    let cfg = ExperimentConfig::parse(&text).map_err(Failure::config)?;
    Ok((cfg, bytes))
}

fn init_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| Failure {
        kind: "invalid_parameter",
        message: format!("{THREADS_ENV} must be a positive integer, got {v:?}"),
        code: 2,
    })?;
    // a pool that is already built keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn run(config: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<(), Failure> {
    init_threads()?;
    let (mut cfg, bytes) = load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let dir = out.or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("."));
    let artifacts = experiments::run(&cfg).map_err(Failure::runtime)?;
    fs::create_dir_all(&dir).map_err(|e| Failure::io(&dir, e))?;
    let hash = hex::encode(Sha256::digest(&bytes));
    let mut written = Vec::new();
    for a in artifacts {
        let path = dir.join(&a.file);
        let text = format!(
            "# avgdyn {}\n# experiment: {}\n# config_sha256: {hash}\n# seed: {}\n# target: {}\n{}",
            env!("CARGO_PKG_VERSION"),
            cfg.experiment.name(),
            cfg.seed,
            a.target,
            a.body
        );
        fs::write(&path, text).map_err(|e| Failure::io(&path, e))?;
        written.push(path.display().to_string());
    }
    println!("{}", json!({ "status": "ok", "experiment": cfg.experiment.name(), "files": written }));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, seed, out } => run(&config, seed, out),
        Command::Validate { config } => load(&config).map(|(cfg, _)| {
            println!("{}", json!({ "status": "ok", "experiment": cfg.experiment.name() }));
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", json!({ "error": { "kind": f.kind, "message": f.message } }));
            ExitCode::from(f.code)
        }
    }
}
