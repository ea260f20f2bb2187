use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn etdf(args: &[&str]) -> Output {
    etdf_env(args, &[])
}

fn etdf_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_etdf"));
    cmd.args(args).env_remove("ETDF_NUM_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

fn write_config(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn design_reproduces_benchmark_gains() {
    let v = json(&etdf(&["design", "--model", "hopf", "--p", "-0.25", "--targets", "0+0.5i,0-0.5i"]));
    let k: Vec<f64> = v["gains"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!((k[0] + 0.258).abs() < 1e-3 && (k[1] - 4.786).abs() < 1e-3, "{k:?}");
    assert!(v["max_residual"].as_f64().unwrap() < 1e-9);
    assert!(v["controllability_det"].as_f64().unwrap().abs() > 1.0);
}

#[test]
fn design_at_hopf_point_is_uncontrollable() {
    let out = etdf(&["design", "--p", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("uncontrollable at Hopf point"));
}

#[test]
fn design_with_real_targets() {
    let v = json(&etdf(&["design", "--targets", "0.1,0.2"]));
    assert!(v["max_residual"].as_f64().unwrap() < 1e-9);
    for a in v["achieved"].as_array().unwrap() {
        assert!(a["residual"].as_f64().unwrap() < 1e-9);
    }
}

#[test]
fn bad_input_exits_with_two() {
    let dir = TempDir::new().unwrap();
    let typo = write_config(&dir, "typo.toml", "[design]\nepsilom = 0.1\n");
    assert_eq!(etdf(&["design", "--config", &typo]).status.code(), Some(2));
    assert_eq!(etdf(&["design", "--epsilon", "1.5"]).status.code(), Some(2));
    assert_eq!(etdf(&["design", "--targets", "0.5"]).status.code(), Some(2));
    assert_eq!(etdf(&["simulate", "--p", "0.1"]).status.code(), Some(2));
    assert_eq!(etdf(&["design", "--config", "/nonexistent/x.toml"]).status.code(), Some(2));
    let out = etdf_env(&["sweep"], &[("ETDF_NUM_THREADS", "zero")]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn spectrum_verdicts() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("bench");
    let v = json(&etdf(&["spectrum", "--gating", "state", "--rho", "0.3", "--out", out.to_str().unwrap()]));
    assert_eq!(v["stable"], true);
    assert!(v["max_nontrivial_modulus"].as_f64().unwrap() < 1.0);
    let (header, rows) = csv_rows(&out.join("spectrum.csv"));
    assert_eq!(&header[..3], &["config_hash", "method", "class"]);
    for m in ["char_fn", "operator", "asymptotic"] {
        assert!(rows.iter().any(|r| r[1] == m), "no {m} rows");
    }

    let v = json(&etdf(&["spectrum", "--gains", "0,0"]));
    assert_eq!(v["stable"], false);
    let e_pi = std::f64::consts::PI.exp();
    assert!((v["max_nontrivial_modulus"].as_f64().unwrap() - e_pi).abs() < 1e-3 * e_pi);

    // constant gains with K1 + K2 <= 0
    let v = json(&etdf(&["spectrum", "--gains", "-1,0.5", "--gating", "constant", "--epsilon", "0.02"]));
    assert_eq!(v["stable"], false);
}

#[test]
fn simulate_outcomes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sim");
    let v = json(&etdf(&["simulate", "--gating", "state", "--rho", "0.3", "--out", out.to_str().unwrap()]));
    assert_eq!(v["verdict"], "converged");
    assert!(v["control_ratio"].as_f64().unwrap() < 1e-6);
    let (h, rows) = csv_rows(&out.join("periods.csv"));
    assert_eq!(rows.len(), 400);
    assert_eq!(rows[0][col(&h, "period")], "1");
    let (h, rows) = csv_rows(&out.join("trajectory.csv"));
    assert_eq!(&h[1..], &["t", "x1", "x2", "xtilde1", "xtilde2", "u"]);
    assert_eq!(rows.len(), 400 * 8);

    // no control: a recorded divergence is still a successful run
    let v = json(&etdf(&["simulate", "--gains", "0,0"]));
    assert_eq!(v["verdict"], "diverged");
    assert!(v["diverged_in_period"].as_u64().unwrap() >= 1);

    let cfg = write_config(&dir, "zero.toml", "[simulate]\nperturbation = 0.0\nperiods = 20\n");
    let v = json(&etdf(&["simulate", "--config", &cfg]));
    assert!(v["final_orbit_distance"].as_f64().unwrap() < 1e-8);
    assert!(v["final_max_control"].as_f64().unwrap() < 1e-6);
}

#[test]
fn sweep_over_the_family() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "p.toml", "[sweep]\np = { start = -0.5, stop = -0.05, count = 20 }\n");
    let out = dir.path().join("p");
    let v = json(&etdf(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]));
    assert_eq!(v["points"], 20);
    assert_eq!(v["failed"], 0);
    let (h, rows) = csv_rows(&out.join("sweep.csv"));
    assert_eq!(rows.len(), 20);
    let k1 = col(&h, "k1");
    assert!(rows.iter().all(|r| r[k1].parse::<f64>().unwrap() < 0.0));
    let p: Vec<f64> = rows.iter().map(|r| r[col(&h, "p")].parse().unwrap()).collect();
    assert!(p.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn epsilon_sweep_tracks_the_delay_circle() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "e.toml", "[sweep]\nepsilon = [0.01, 0.02, 0.04]\n");
    let out = dir.path().join("e");
    json(&etdf(&["sweep", "--config", &cfg, "--gains", "-0.258,4.786", "--out", out.to_str().unwrap()]));
    let (h, rows) = csv_rows(&out.join("sweep.csv"));
    for r in &rows {
        let eps: f64 = r[col(&h, "epsilon")].parse().unwrap();
        let radius: f64 = r[col(&h, "delay_radius")].parse().unwrap();
        assert!((radius - eps / 2.0).abs() < 0.1 * eps / 2.0, "eps {eps}: radius {radius}");
    }
}

#[test]
fn empty_grid_writes_header_only() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "empty.toml", "[sweep]\np = []\n");
    let out = dir.path().join("empty");
    let v = json(&etdf(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]));
    assert_eq!(v["points"], 0);
    let text = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("config_hash,p,epsilon,delta,k1,k2,stable"));
}

#[test]
fn outputs_are_deterministic_and_carry_the_hash() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "d.toml", "[sweep]\np = [-0.3, -0.2, -0.1]\nepsilon = [0.02, 0.04]\n");
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let o = etdf_env(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()], &[("ETDF_NUM_THREADS", threads)]);
        assert!(o.status.success());
        out
    };
    let (a, b) = (run("a", "1"), run("b", "4"));
    for f in ["sweep.csv", "sweep_summary.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    // the out dir is part of the config, so compare the rest of it
    let mut ca = read_json(&a.join("config.json"));
    let mut cb = read_json(&b.join("config.json"));
    let hash = ca["config_hash"].as_str().unwrap().to_string();
    assert_eq!(hash.len(), 64);
    ca["config"]["output"]["dir"] = Value::Null;
    cb["config"]["output"]["dir"] = Value::Null;
    assert_eq!(ca["config"], cb["config"]);

    let (h, rows) = csv_rows(&a.join("sweep.csv"));
    assert_eq!(h[0], "config_hash");
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r[0] == hash));
    assert_eq!(read_json(&a.join("sweep_summary.json"))["config_hash"], hash.as_str());
    // scientific notation, at least 12 significant digits
    let k1 = &rows[0][col(&h, "k1")];
    let mantissa = k1.trim_start_matches('-').split('e').next().unwrap().replace('.', "");
    assert!(mantissa.len() >= 12, "{k1}");
}

#[test]
fn json_format_for_array_output() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("j");
    json(&etdf(&["spectrum", "--format", "json", "--mesh", "64", "--out", out.to_str().unwrap()]));
    let v = read_json(&out.join("spectrum.json"));
    assert_eq!(v["config_hash"].as_str().unwrap().len(), 64);
    assert!(v["rows"].as_array().unwrap().iter().any(|r| r["class"] == "trivial"));
    assert!(!out.join("spectrum.csv").exists());
}

#[test]
fn expression_model_matches_the_built_in_hopf() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "custom.toml",
        r#"
[model]
name = "custom"
equations = [
    "p*x1 - x2 + x1*(x1^2 + x2^2) + u",
    "x1 + p*x2 + x2*(x1^2 + x2^2) + u",
]
constants = { p = -0.25 }
period_guess = 6.0
seed = [0.0, -0.45]
"#,
    );
    let custom = json(&etdf(&["design", "--config", &cfg]));
    let hopf = json(&etdf(&["design"]));
    assert!((custom["period"].as_f64().unwrap() - hopf["period"].as_f64().unwrap()).abs() < 1e-8);
    // the shooting phase anchor differs slightly from the analytic one, so
    // compare what does not depend on phase
    let det = |v: &Value| v["monodromy"][0][0].as_f64().unwrap() * v["monodromy"][1][1].as_f64().unwrap()
        - v["monodromy"][0][1].as_f64().unwrap() * v["monodromy"][1][0].as_f64().unwrap();
    assert!((det(&custom) - det(&hopf)).abs() < 1e-6 * det(&hopf));
    assert!(custom["max_residual"].as_f64().unwrap() < 1e-9);
}

#[test]
fn shipped_configs_load_and_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = etdf_cli::config::RunConfig::load(&path)
                .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 5, "only {seen} configs found");
}
