use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("nls-jitter-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&d);
    fs::create_dir_all(&d).unwrap();
    d
}

fn run(dir: &Path, args: &[&str], config: &str) -> Output {
    let cfg = dir.join("config.toml");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_nls-jitter"))
        .args(args)
        .arg(&cfg)
        .arg("--out")
        .arg(dir)
        .output()
        .unwrap()
}

fn data_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

const SOLITON: &str = "[grid]\nhalf_length = 20\nn_points = 512\n\n[dynamics]\nT = 1.0\ndt = 1e-3\nstride = 50\n";

#[test]
fn bounds_json_for_arrival_multiplicative() {
    let dir = scratch("bounds");
    let cfg = format!("{SOLITON}\n[scenario]\nname = \"arrival_multiplicative\"\nR = 1\nA = 1\nphi_norm = 1\n");
    let out = run(&dir, &["bounds"], &cfg);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let up = v["report"]["upper_rate"].as_f64().unwrap();
    let lo = v["report"]["lower_rate"].as_f64().unwrap();
    assert!((up + 0.017578125).abs() < 1e-12);
    assert!((lo + 0.0234375).abs() < 1e-12);
    assert_eq!(v["report"]["consistent"], true);
    assert_eq!(v["meta"]["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["meta"]["config_sha256"].as_str().unwrap().len(), 64);
    assert!(dir.join("run_bounds.json").exists());
}

#[test]
fn deterministic_simulation_keeps_mass_and_arrival_time() {
    let dir = scratch("simulate");
    let out = run(&dir, &["simulate"], SOLITON);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.join("run_observables.csv")).unwrap();
    assert!(text.starts_with("# nls-jitter "));
    assert!(text.lines().next().unwrap().contains("config_sha256="));
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 21);
    for r in &rows {
        assert!((r[1] - 4.0).abs() < 1e-8, "mass {}", r[1]);
        assert!(r[2].abs() < 1e-8, "arrival time {}", r[2]);
    }
}

#[test]
fn reruns_are_bit_identical() {
    let dir = scratch("repro");
    let cfg = format!(
        "{SOLITON}\n[noise]\nmodel = \"multiplicative\"\nepsilon = 0.05\nseed = 12\n\n[output]\nsnapshots = true\n"
    );
    assert!(run(&dir, &["simulate"], &cfg).status.success());
    let a = fs::read(dir.join("run_snapshots.bin")).unwrap();
    let csv_a = fs::read(dir.join("run_observables.csv")).unwrap();
    assert!(run(&dir, &["simulate"], &cfg).status.success());
    assert_eq!(a, fs::read(dir.join("run_snapshots.bin")).unwrap());
    assert_eq!(csv_a, fs::read(dir.join("run_observables.csv")).unwrap());
    let snap = nls_jitter::io::read_snapshots(a.as_slice()).unwrap();
    assert_eq!(snap.n_points, 512);
    assert_eq!(snap.times.len(), 21);
}

#[test]
fn missing_time_horizon_is_a_validation_error() {
    let dir = scratch("missing");
    let out = run(
        &dir,
        &["simulate"],
        "[grid]\nhalf_length = 20\nn_points = 256\n[dynamics]\ndt = 1e-3\n",
    );
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("dynamics.T"), "{err}");
}

#[test]
fn numerical_failures_exit_with_two() {
    let dir = scratch("domain");
    let out = run(
        &dir,
        &["simulate"],
        "[grid]\nhalf_length = 4\nn_points = 64\n[dynamics]\nT = 1\ndt = 1e-2\n",
    );
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn controls_and_oracle_verdicts() {
    let dir = scratch("controls");
    let cfg = format!("{SOLITON}\n[control]\nkind = \"velocity\"\ntarget = 1.0\n");
    let out = run(&dir, &["controls", "--strict", "--gnuplot-script"], &cfg);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.join("run_controls.gp").exists());
    let v: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("run_controls.json")).unwrap()).unwrap();
    assert_eq!(v["summary"]["pass"], true);
    assert!((v["summary"]["final_arrival_time"].as_f64().unwrap() - 1.0).abs() < 1e-4);

    let out = run(&dir, &["oracle", "--strict"], SOLITON);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = data_rows(&fs::read_to_string(dir.join("run_oracle_errors.csv")).unwrap());
    assert!(rows.iter().all(|r| r[1] < 1e-6));
}

#[test]
fn strict_tails_verdict() {
    let dir = scratch("tails");
    let cfg = "[grid]\nhalf_length = 8\nn_points = 32\n\n[dynamics]\nT = 1.0\ndt = 1e-2\ninitial_datum = \"zero\"\n\n\
               [noise]\nmodel = \"additive\"\nkind = \"cutoff\"\nk_max = 0\nseed = 3\n\n\
               [scenario]\nname = \"mass_up_from_zero\"\nR = 1\nphi_norm = 1\neps_list = [0.5, 0.25]\nn_samples = 400\nmethod = \"plain\"\n";
    let out = run(&dir, &["tails", "--sequential"], cfg);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.join("run_tails.csv")).unwrap();
    assert!(text.contains("epsilon,n,p_hat,log_rate,std_error,method,ess"));
    let v: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("run_verdict.json")).unwrap()).unwrap();
    let passed = v["tails"]["verdict"]["outcome"] == "pass";
    let strict = run(&dir, &["tails", "--strict"], cfg);
    assert_eq!(strict.status.code(), Some(if passed { 0 } else { 3 }));
    // Parallel and sequential runs write the same estimates.
    assert_eq!(text, fs::read_to_string(dir.join("run_tails.csv")).unwrap());
}
