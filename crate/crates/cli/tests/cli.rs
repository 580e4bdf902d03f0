//! End-to-end runs of the `glvortex` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn glvortex(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_glvortex")).args(args).arg("--out").arg(out).env_remove("GLVORTEX_THREADS").output().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn eigen_sphere_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let out = glvortex(&["eigen", "--count", "4"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = read_json(&dir.path().join("eigen.json"));
    assert_eq!(v["meta"]["command"], "eigen");
    let points: Vec<f64> = v["result"]["bifurcation_points"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    for (got, want) in points.iter().zip([2.0, 6.0, 12.0, 20.0]) {
        assert!((got - want).abs() < 1e-8 * want);
    }
}

#[test]
fn output_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let out = glvortex(&["attractor", "--lambda", "8"], dir.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["attractor.json", "attractor.dot"] {
        assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap(), "{name} differs");
    }
    let v = read_json(&a.path().join("attractor.json"));
    assert_eq!(v["result"]["chafee_infante"], true);
    assert_eq!(v["result"]["nodes"].as_array().unwrap().len(), 5);
}

#[test]
fn equilibria_writes_profiles() {
    let dir = tempfile::tempdir().unwrap();
    let out = glvortex(&["equilibria", "--surface", "disk", "--lambda", "30"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = read_json(&dir.path().join("equilibria.json"));
    let labels: Vec<&str> = v["result"]["equilibria"].as_array().unwrap().iter().map(|e| e["label"].as_str().unwrap()).collect();
    assert_eq!(labels, ["O", "0+", "0-"]);
    let csv = std::fs::read_to_string(dir.path().join("profiles.csv")).unwrap();
    assert!(csv.starts_with("s,O,0+,0-,discrete_O"));
    assert_eq!(csv.lines().count(), 2049);
}

#[test]
fn spiral_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"surface": {"kind": "sphere"}, "lambda": 4, "solve": {"mesh_nodes": 512}, "spiral": {"target": [0.05, 0.02], "path_steps": 4}}"#,
    )
    .unwrap();
    let out = glvortex(&["spiral", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = read_json(&dir.path().join("spiral.json"));
    let sources = v["result"].as_array().unwrap();
    assert_eq!(sources.len(), 2);
    for s in sources {
        assert_eq!(s["kernel"]["unbordered"], 1);
        assert_eq!(s["kernel"]["bordered"], 0);
        let sweep = s["sweep"].as_array().unwrap();
        assert_eq!(sweep[0]["omega"].as_f64(), Some(0.0));
        assert!(sweep.last().unwrap()["residual"].as_f64().unwrap() < 1e-10);
    }
    assert!(dir.path().join("spiral_0p.csv").exists() && dir.path().join("spiral_0m.csv").exists());
}

#[test]
fn evolve_trace_settles_on_principal_equilibrium() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"surface": {"kind": "sphere"}, "lambda": 4, "solve": {"mesh_nodes": 256}, "evolve": {"mode": "trace"}}"#).unwrap();
    let out = glvortex(&["evolve", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = read_json(&dir.path().join("trace.json"));
    assert_eq!(v["result"]["stationary"], true);
    assert_eq!(v["result"]["omega_limit"]["label"], "0+");
    assert!(v["result"]["max_energy_increase"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn config_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{\n  \"surface\": {\"kind\": \"sphere\"},\n  \"lamda\": 4\n}").unwrap();
    let out = glvortex(&["equilibria", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("lamda") && err.contains("line 3"), "{err}");

    let out = glvortex(&["equilibria"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lambda"));
}

#[test]
fn near_bifurcation_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let out = glvortex(&["equilibria", "--lambda", "6"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bifurcation"));
}

#[test]
fn schemas_cover_outputs() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas");
    for name in ["eigen", "equilibria", "diagram", "attractor", "spiral", "harvest", "trace", "verify"] {
        let v = read_json(&dir.join(format!("{name}.schema.json")));
        assert_eq!(v["properties"]["meta"]["properties"]["tool"]["const"], "glvortex");
    }
}
