use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn avgdyn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_avgdyn"))
        .args(args)
        .env("AVGDYN_THREADS", "2")
        .output()
        .expect("spawn avgdyn")
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> String {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path.display().to_string()
}

fn error_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.trim()).unwrap_or_else(|_| panic!("stderr is not JSON: {text}"))
}

fn body(text: &str) -> String {
    text.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n")
}

fn moments_config() -> Value {
    json!({
        "schema_version": 1,
        "experiment": "moments",
        "seed": 7,
        "params": {
            "hamiltonian": { "kind": "free", "mass": 1.0 },
            "noise": { "family": "gaussian", "c0": 1.0, "ell_p": null, "ell_q": 1.0 },
            "initial": { "kind": "point", "p": 0.0, "q": 0.0 },
            "times": [0.5, 1.0, 2.0],
            "trajectories": 2000
        }
    })
}

#[test]
fn empty_config_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.json");
    fs::write(&path, "").unwrap();
    let out = avgdyn(&["run", "--config", path.to_str().unwrap()]);
    assert_ne!(out.status.code(), Some(0));
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"]["kind"], "schema");
}

#[test]
fn wrong_schema_version_and_unknown_fields_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = moments_config();
    cfg["schema_version"] = json!(2);
    let p = write_config(dir.path(), "v2.json", &cfg);
    let out = avgdyn(&["validate", "--config", &p]);
    assert_eq!(out.status.code(), Some(2));

    let mut cfg = moments_config();
    cfg["extra"] = json!(true);
    let p = write_config(dir.path(), "extra.json", &cfg);
    let out = avgdyn(&["validate", "--config", &p]);
    assert_eq!(out.status.code(), Some(2));
    assert!(error_json(&out)["error"]["message"].is_string());
}

#[test]
fn validate_accepts_a_good_config() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "m.json", &moments_config());
    let out = avgdyn(&["validate", "--config", &p]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let status: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(status["status"], "ok");
    assert_eq!(status["experiment"], "moments");
}

#[test]
fn same_seed_gives_identical_bodies() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "m.json", &moments_config());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    for d in [&a, &b] {
        let out = avgdyn(&["run", "--config", &p, "--out", d.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let out = avgdyn(&["run", "--config", &p, "--out", c.to_str().unwrap(), "--seed", "8"]);
    assert!(out.status.success());

    let ta = fs::read_to_string(a.join("moments.csv")).unwrap();
    let tb = fs::read_to_string(b.join("moments.csv")).unwrap();
    let tc = fs::read_to_string(c.join("moments.csv")).unwrap();
    assert_eq!(body(&ta), body(&tb));
    assert_ne!(body(&ta), body(&tc));
    assert!(tc.contains("# seed: 8"));

    for line in ["# experiment: moments", "# config_sha256: ", "# seed: 7", "# target: "] {
        assert!(ta.contains(line), "missing {line:?}");
    }
    assert!(body(&ta).starts_with("time,observable,analytic,estimate,stderr,z,n_traj,seed"));
}

#[test]
fn free_drude_diffusion_constant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "schema_version": 1,
        "experiment": "longtime",
        "seed": 0,
        "params": {
            "spectral": { "family": "drude", "j0": 1.0, "omega0": 1.0 },
            "noise": { "family": "constant", "c0": 0.0 },
            "mass": 1.0,
            "omega": 0.0,
            "beta": 1.0
        }
    });
    let p = write_config(dir.path(), "lt.json", &cfg);
    let out = avgdyn(&["run", "--config", &p, "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("longtime.csv")).unwrap();
    let dc: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("diffusion_constant,"))
        .expect("diffusion_constant row")
        .parse()
        .unwrap();
    let target = 2.0 / std::f64::consts::PI;
    assert!((dc - target).abs() < 0.02 * target, "{dc} vs {target}");
}

#[test]
fn ohmic_table_is_an_assumption_violation() {
    let dir = tempfile::tempdir().unwrap();
    let nu: Vec<f64> = (0..20).map(|i| 0.5 * i as f64).collect();
    let j: Vec<f64> = nu.iter().map(|&v| v * (-v / 5.0f64).exp()).collect();
    let cfg = json!({
        "schema_version": 1,
        "experiment": "bath-green",
        "seed": 0,
        "params": {
            "spectral": { "family": "tabulated", "nu": nu, "J": j },
            "mass": 1.0,
            "omega": 1.0,
            "t_max": 5.0
        }
    });
    let p = write_config(dir.path(), "ohmic.json", &cfg);
    let out = avgdyn(&["run", "--config", &p, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"]["kind"], "assumption_violation");
    assert!(!dir.path().join("green.csv").exists());
}

#[test]
fn bad_thread_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "m.json", &moments_config());
    let out = Command::new(env!("CARGO_BIN_EXE_avgdyn"))
        .args(["run", "--config", &p, "--out", dir.path().to_str().unwrap()])
        .env("AVGDYN_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
