//! End-to-end checks of the command-line surface: exit statuses, artifact
//! shapes, and reproducibility.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_lcflow")
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("lcflow-cli-{name}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_cfg(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn run(sub: &str, cfg: &Path, out: &Path) -> std::process::Output {
    Command::new(bin())
        .args([sub, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--quiet"])
        .output()
        .unwrap()
}

const SIM_CFG: &str = r#"{
    "command": "simulate",
    "seed": 1,
    "grid": { "mode": "axisymmetric", "n": 2, "resolution": 48 },
    "shape": { "radius": 1.1, "harmonics": [ { "j": 2, "amp": 0.05 } ] },
    "flow": { "law": "constrained_mcf", "fhat": "r - 1", "domain": [0.2, 3.0],
              "t_max": 20.0, "record_every": 10 }
}"#;

#[test]
fn simulate_then_audit_roundtrip() {
    let dir = workdir("sim-audit");
    let cfg = write_cfg(&dir, "sim.json", SIM_CFG);
    let out = run("simulate", &cfg, &dir);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.join("series.csv")).unwrap();
    assert!(csv.lines().count() > 3, "expected recorded rows");
    assert!(csv.starts_with("t,dt,area,int_f_pow,W0,int_Ek1_g,max_grad_sq,"));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["audit"]["primary_monotone"], serde_json::Value::Bool(true));
    // the run converges onto the constraint zero
    assert!(summary["final_deviation"].as_f64().unwrap() < 1e-4);
    assert!(summary["fitted_decay_rate"].as_f64().unwrap() < 0.0);

    // audit the series we just wrote
    let audit_cfg = write_cfg(
        &dir,
        "audit.json",
        &format!(
            r#"{{ "command": "audit",
                 "audit": {{ "series_csv": "{}", "law": "constrained_mcf" }},
                 "outputs": {{ "csv": "audit.csv", "json": "audit.json.out" }} }}"#,
            dir.join("series.csv").display()
        ),
    );
    let out = run("audit", &audit_cfg, &dir);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    // corrupt the series with an uptick and expect the audit to flag it
    let mut lines: Vec<String> = csv.lines().map(String::from).collect();
    let mid = lines.len() / 2;
    let mut fields: Vec<String> = lines[mid].split(',').map(String::from).collect();
    let bumped: f64 = fields[3].parse::<f64>().unwrap() * 1.5;
    fields[3] = format!("{bumped:.16e}");
    lines[mid] = fields.join(",");
    let broken = dir.join("broken.csv");
    std::fs::write(&broken, lines.join("\n") + "\n").unwrap();
    let audit_cfg2 = write_cfg(
        &dir,
        "audit2.json",
        &format!(
            r#"{{ "command": "audit",
                 "audit": {{ "series_csv": "{}", "law": "constrained_mcf" }},
                 "outputs": {{ "csv": "audit2.csv", "json": "audit2.json.out" }} }}"#,
            broken.display()
        ),
    );
    let out = run("audit", &audit_cfg2, &dir);
    assert_eq!(out.status.code(), Some(2), "uptick must be an invariant violation");
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("monotonicity"), "stderr: {msg}");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = workdir("rerun");
    let cfg = write_cfg(&dir, "sim.json", SIM_CFG);
    let out1 = dir.join("a");
    let out2 = dir.join("b");
    assert!(run("simulate", &cfg, &out1).status.success());
    assert!(run("simulate", &cfg, &out2).status.success());
    assert_eq!(
        std::fs::read(out1.join("series.csv")).unwrap(),
        std::fs::read(out2.join("series.csv")).unwrap()
    );
    assert_eq!(
        std::fs::read(out1.join("summary.json")).unwrap(),
        std::fs::read(out2.join("summary.json")).unwrap()
    );
}

#[test]
fn verify_equality_case_gap() {
    let dir = workdir("verify-eq");
    let cfg = write_cfg(
        &dir,
        "verify.json",
        r#"{
            "command": "verify",
            "grid": { "mode": "axisymmetric", "n": 2, "resolution": 64 },
            "shape": { "radius": 1.0 },
            "verify": { "k": 1, "f": { "kind": "constant", "value": 1.0 }, "samples": 0 }
        }"#,
    );
    let out = run("verify", &cfg, &dir);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    let gap = summary["base_report"]["gap"].as_f64().unwrap();
    assert!(gap.abs() < 1e-9, "equality-case gap {gap}");
    let lhs = summary["base_report"]["lhs"].as_f64().unwrap();
    assert!((lhs - 4.0 * std::f64::consts::PI * 1.0f64.sinh()).abs() < 1e-6);
}

#[test]
fn usage_errors_exit_1() {
    let dir = workdir("usage");

    // malformed JSON reports a position
    let bad = write_cfg(&dir, "bad.json", "{ not json");
    let out = run("geometry", &bad, &dir);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));

    // unknown field
    let unknown = write_cfg(
        &dir,
        "unknown.json",
        r#"{ "command": "geometry", "grid": { "mode": "radial", "n": 2, "resolution": 1 }, "oops": true }"#,
    );
    assert_eq!(run("geometry", &unknown, &dir).status.code(), Some(1));

    // k = n rejected for the k-th inequality
    let ken = write_cfg(
        &dir,
        "ken.json",
        r#"{ "command": "verify",
             "grid": { "mode": "axisymmetric", "n": 2, "resolution": 64 },
             "verify": { "k": 2, "f": { "kind": "constant", "value": 1.0 } } }"#,
    );
    let out = run("verify", &ken, &dir);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unsupported"));

    // subcommand / config mismatch
    let sim = write_cfg(&dir, "sim.json", SIM_CFG);
    assert_eq!(run("geometry", &sim, &dir).status.code(), Some(1));

    // missing config file
    let out = run("geometry", &dir.join("nope.json"), &dir);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn invariant_violations_exit_2() {
    let dir = workdir("inv");
    // a dumbbell pinch is not 2-convex: the inverse flow must refuse it
    let cfg = write_cfg(
        &dir,
        "icf.json",
        r#"{
            "command": "simulate",
            "grid": { "mode": "axisymmetric", "n": 2, "resolution": 64 },
            "shape": { "radius": 1.0, "harmonics": [ { "j": 2, "amp": 0.8 } ] },
            "flow": { "law": "inverse_curvature", "k": 2, "t_max": 1.0 }
        }"#,
    );
    let out = run("simulate", &cfg, &dir);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cone"));
}

#[test]
fn geometry_full2d_summary() {
    let dir = workdir("geom2d");
    let cfg = write_cfg(
        &dir,
        "geom.json",
        r#"{
            "command": "geometry",
            "grid": { "mode": "full2d", "n": 2, "resolution": [32, 64] },
            "shape": { "radius": 1.0 }
        }"#,
    );
    let out = run("geometry", &cfg, &dir);
    assert!(out.status.success());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["nodes"].as_u64(), Some(2048));
    assert!((summary["area"].as_f64().unwrap() - 17.3554).abs() < 1e-3);
    // header-only CSV for geometry runs
    let csv = std::fs::read_to_string(dir.join("series.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
}
