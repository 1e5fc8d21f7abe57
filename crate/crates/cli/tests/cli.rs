use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn phasestat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phasestat")).args(args).env_remove("PHASESTAT_OUT").output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn write_config(dir: &TempDir, text: &str) -> String {
    let path = dir.path().join("run.json");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn csv(path: &Path) -> (String, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_owned();
    (header, lines.map(|l| l.split(',').map(str::to_owned).collect()).collect())
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn sha(path: &Path) -> Vec<u8> {
    Sha256::digest(fs::read(path).unwrap()).to_vec()
}

const LINEAR: &str = r#"{"surface": {"kind": "linear", "t": 1.0}}"#;

#[test]
fn linear_surface_passes_validation() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, LINEAR);
    let out = tmp.path().join("out");
    let res = phasestat(&["build-surface", "--config", &cfg, "-o", out.to_str().unwrap()]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));

    let (header, rows) = csv(&out.join("validation.csv"));
    assert_eq!(header, "check,passed,value");
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r[1] == "true"));
    let profile = json(&out.join("profile.json"));
    assert_eq!(profile["profile"]["kind"], "linear");
    assert_eq!(profile["profile"]["t"], 1.0);

    // ψ(x) = −x/2 on the tabulation grid
    let (header, rows) = csv(&out.join("phase.csv"));
    assert_eq!(header, "x,psi,phi,phi2");
    for r in rows {
        let x: f64 = r[0].parse().unwrap();
        let psi: f64 = r[1].parse().unwrap();
        assert!((psi + 0.5 * x).abs() < 1e-10);
    }
}

#[test]
fn oversized_beta_is_a_validation_failure() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        &tmp,
        r#"{"surface": {"kind": "family", "alpha": -0.5, "beta": 1.0, "coefficient": {"kind": "rational", "rho": 0.5}}}"#,
    );
    let res = phasestat(&["build-surface", "--config", &cfg, "-o", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&res), 2);
}

#[test]
fn malformed_and_invalid_configs_are_usage_errors() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().to_str().unwrap();
    for text in [r#"{"eps": 0.1,"#, r#"{"sed": 4}"#, r#"{"lambdas": []}"#, r#"{"eps": 0.7}"#, r#"{"lambdas": [5]}"#] {
        let cfg = write_config(&tmp, text);
        let res = phasestat(&["scan", "--config", &cfg, "-o", dir]);
        assert_eq!(code(&res), 1, "config {text}");
        assert!(!res.stderr.is_empty());
    }
    assert_eq!(code(&phasestat(&["scan", "--config", "/nonexistent/run.json"])), 1);
    assert_eq!(code(&phasestat(&["no-such-command"])), 1);
    assert_eq!(code(&phasestat(&["scan", "--backend", "magic"])), 1);
    // the scan draws from a family rectangle
    let cfg = write_config(&tmp, LINEAR);
    assert_eq!(code(&phasestat(&["scan", "--config", &cfg, "-o", dir])), 1);
}

#[test]
fn phase_shift_table_has_symmetric_window() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("ps");
    let res = phasestat(&["phase-shifts", "--lambdas", "100", "--eps", "0.1", "-o", out.to_str().unwrap()]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let (header, rows) = csv(&out.join("phase_shifts.csv"));
    assert_eq!(header, "lambda,k,delta,backend,est_error");
    assert_eq!(rows.len(), 158);
    for (a, b) in rows.iter().zip(rows.iter().rev()) {
        assert_eq!(a[1].parse::<i64>().unwrap(), -b[1].parse::<i64>().unwrap());
        assert_eq!(a[2], b[2]);
        assert_eq!(a[3], "model");
    }
}

#[test]
fn exact_backend_stays_close_to_wkb() {
    let tmp = TempDir::new().unwrap();
    let mut rows = Vec::new();
    for backend in ["wkb", "exact"] {
        let out = tmp.path().join(backend);
        let res = phasestat(&["phase-shifts", "--lambdas", "50", "--backend", backend, "-o", out.to_str().unwrap()]);
        assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
        rows.push(csv(&out.join("phase_shifts.csv")).1);
    }
    assert_eq!(rows[0].len(), rows[1].len());
    let worst = rows[0]
        .iter()
        .zip(&rows[1])
        .map(|(w, e)| (w[2].parse::<f64>().unwrap() - e[2].parse::<f64>().unwrap()).abs())
        .fold(0.0, f64::max);
    assert!(50.0 * worst < 3.0, "λ·max|δ_exact − δ_wkb| = {}", 50.0 * worst);
    assert!(rows[1].iter().all(|r| r[4].parse::<f64>().unwrap() < 1e-6));
}

#[test]
fn paircorr_columns_agree_and_linear_model_does_not_decay() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, LINEAR);
    let out = tmp.path().join("pc");
    let res = phasestat(&["paircorr", "--config", &cfg, "--lambdas", "100,400", "-o", out.to_str().unwrap()]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let (header, rows) = csv(&out.join("paircorr.csv"));
    assert_eq!(header, "lambda,backend,count,rho_direct,rho_fourier,zero_mode,diagonal,error_term,target");
    let target = (2.0 * std::f64::consts::PI).sqrt() + 1.0;
    for r in &rows {
        let v: Vec<f64> = [3, 4, 8].iter().map(|&i| r[i].parse().unwrap()).collect();
        assert!((v[0] - v[1]).abs() <= 1e-6);
        assert!((v[2] - target).abs() < 1e-14);
    }
    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["non_decaying"], true);
}

#[test]
fn scan_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let run = |name: &str, seed: &str| {
        let out = tmp.path().join(name);
        let res = phasestat(&[
            "scan",
            "--samples",
            "16",
            "--lambdas",
            "100,200",
            "--seed",
            seed,
            "-o",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
        out
    };
    let a = run("a", "7");
    let b = run("b", "7");
    let c = run("c", "8");
    for file in ["scan.csv", "summary.json"] {
        assert_eq!(sha(&a.join(file)), sha(&b.join(file)), "{file}");
    }
    assert_ne!(sha(&a.join("scan.csv")), sha(&c.join("scan.csv")));

    let (header, rows) = csv(&a.join("scan.csv"));
    assert_eq!(header, "lambda,alpha,beta,abs_E,abs_E_sq,rho,target,backend");
    assert_eq!(rows.len(), 32);
    let summary = json(&a.join("summary.json"));
    assert_eq!(summary["seed"], 7);
    assert!(summary["pooled_k"].as_f64().unwrap() > 0.0);
    let per = summary["per_lambda"].as_array().unwrap();
    assert_eq!(per.len(), 2);
    assert!(per.iter().all(|s| s["fitted_k"].is_number() && s["median_discrepancy"].is_number()));
}

#[test]
fn output_directory_from_environment() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("env-out");
    let res = Command::new(env!("CARGO_BIN_EXE_phasestat"))
        .args(["arith"])
        .env("PHASESTAT_OUT", &out)
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    assert!(out.join("counting.csv").exists());
}

#[test]
fn arithmetic_tables() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("ar");
    let res = phasestat(&["arith", "-o", out.to_str().unwrap()]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));

    let (_, divisors) = csv(&out.join("divisors.csv"));
    assert!(divisors.contains(&vec!["12".into(), "6".into()]));
    let (_, f) = csv(&out.join("ftable.csv"));
    assert!(f.contains(&vec!["10".into(), "1".into(), "108".into()]));
    let (header, counting) = csv(&out.join("counting.csv"));
    assert_eq!(header, "N,sum_d2,ratio");
    let last = counting.last().unwrap();
    assert_eq!(last[0], "1000000");
    let ratio: f64 = last[2].parse().unwrap();
    assert!((0.05..=0.3).contains(&ratio));
    let (header, g) = csv(&out.join("gtable.csv"));
    assert_eq!(header, "lambda,N,G,bound_ratio");
    assert_eq!(g.len(), 9);
}

#[test]
fn show_config_round_trips_with_overrides() {
    let res = phasestat(&["show-config", "--seed", "42", "--lambdas", "100,300"]);
    assert_eq!(code(&res), 0);
    let cfg = phasestat_cli::RunConfig::from_json(&String::from_utf8(res.stdout).unwrap()).unwrap();
    assert_eq!(cfg.seed, 42);
    assert_eq!(cfg.lambdas, vec![100.0, 300.0]);
    assert_eq!(phasestat_cli::RunConfig::from_json(&cfg.to_json()).unwrap(), cfg);
}

#[test]
fn rotation_discrepancy_scales_like_one_over_lambda() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("rot");
    let res = phasestat(&["rotation", "--backend", "exact", "--lambdas", "100,200", "-o", out.to_str().unwrap()]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let (header, rows) = csv(&out.join("rotation.csv"));
    assert_eq!(header, "lambda,k,x,quantum,delta_theta_ren,dpsi_dx,discrepancy");
    assert_eq!(rows.len(), 18);
    let scaled: Vec<f64> = json(&out.join("rotation_summary.json"))["scaled_sup"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert!(scaled[0] / scaled[1] < 2.0 && scaled[1] / scaled[0] < 2.0, "{scaled:?}");

    // model phases of the linear model rotate by exactly Δθ_ren
    let cfg = write_config(&tmp, LINEAR);
    let res = phasestat(&["rotation", "--config", &cfg, "--lambdas", "100", "-o", out.to_str().unwrap()]);
    assert_eq!(code(&res), 0);
    let (_, rows) = csv(&out.join("rotation.csv"));
    assert!(rows.iter().all(|r| r[6].parse::<f64>().unwrap() < 1e-9));
}
