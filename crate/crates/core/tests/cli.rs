use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use usaav::experiments::io::read_table;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_usaav")).args(args).output().expect("binary runs")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn shipped_configs_validate() {
    for name in ["exp1", "exp2", "dobrushin", "metastab"] {
        let p = configs().join(format!("{name}.json"));
        let out = bin(&["validate-config", p.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, r#"{"scenario": "exp1", "seeds": 0}"#).unwrap();
    assert_eq!(bin(&["validate-config", p.to_str().unwrap()]).status.code(), Some(2));
    std::fs::write(&p, r#"{"scenario": "exp1", "colour": 1}"#).unwrap();
    assert_eq!(bin(&["validate-config", p.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(bin(&["validate-config", "/nonexistent/cfg.json"]).status.code(), Some(2));
}

#[test]
fn unknown_flag_prints_usage_and_exits_2() {
    let out = bin(&["simulate", "--frobnicate", "3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(bin(&["teleport"]).status.code(), Some(2));
}

#[test]
fn simulate_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(&["simulate", "--model", "baseline", "--n", "64", "--t-final", "20", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let t = read_table(&dir.path().join("runs/baseline_n64_s000/trajectory.csv")).unwrap();
    assert_eq!(
        t.header,
        ["time", "energy", "production", "g_x", "g_q", "d_cond", "delta_e", "delta_max", "theta_min", "w1"]
    );
    let g = t.floats("g_x").unwrap();
    assert!(g.last().unwrap().unwrap() < g[0].unwrap());
    assert!(dir.path().join("manifest.json").exists());
    let fs = read_table(&dir.path().join("runs/baseline_n64_s000/final_states.csv")).unwrap();
    assert_eq!(fs.header, ["particle", "label_kind", "label_value", "x_0", "x_1", "x_2"]);
    assert_eq!(fs.rows.len(), 64);
}

#[test]
fn numerical_abort_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(&["simulate", "--beta", "1000", "--n", "16", "--t-final", "1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn exp2_rope_scenario_is_circle_like() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(&["exp2", "--scenario", "rope", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let t = read_table(&dir.path().join("classification.csv")).unwrap();
    assert_eq!(t.rows.len(), 1);
    assert_eq!(t.rows[0][t.column("class").unwrap()], "circle_like");
    assert!(dir.path().join("runs/rope_n256_s000/final_states.csv").exists());
}

#[test]
fn maximizer_writes_csv_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    for model in ["rope", "generalized_rope", "prompt", "toeplitz"] {
        let out = bin(&["maximizer", "--model", model, "--n", "48", "--beta", "1", "--out", d]);
        assert_eq!(out.status.code(), Some(0), "{model}: {}", String::from_utf8_lossy(&out.stderr));
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(format!("maximizer_{model}.json"))).unwrap())
                .unwrap();
        assert!(v["ceiling_gap"].as_f64().unwrap().abs() < 1e-12, "{model}: {v}");
        assert_eq!(read_table(&dir.path().join(format!("maximizer_{model}.csv"))).unwrap().rows.len(), 48);
    }
    assert_eq!(bin(&["maximizer", "--model", "baseline", "--out", d]).status.code(), Some(2));
}

#[test]
fn config_scenario_must_match_subcommand() {
    let p = configs().join("exp1.json");
    assert_eq!(bin(&["exp2", "--config", p.to_str().unwrap()]).status.code(), Some(2));
}
