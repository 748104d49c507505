use std::path::PathBuf;
use std::process::Command;

fn scratch(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("smc-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn smc(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_smc")).args(args).output().unwrap()
}

#[test]
fn predict_writes_json() {
    let out = scratch("predict");
    let o = smc(&["predict", "--eta", "1", "--omega", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("predictions.json")).unwrap()).unwrap();
    assert_eq!(v["chattering"]["omega_star"], 20.0);
    assert!((v["bias_sinusoidal"]["tracking"]["magnitude"].as_f64().unwrap() - 0.0513).abs() < 1e-4);
    std::fs::remove_dir_all(out).ok();
}

#[test]
fn bode_csv_has_expected_layout() {
    let out = scratch("bode");
    let o = smc(&["bode", "--points", "50", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(out.join("bode.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "omega,mag_abs,mag_db,phase_deg,band,eg_valid,a2_valid,total_dev"
    );
    assert_eq!(lines.count(), 50);
    std::fs::remove_dir_all(out).ok();
}

#[test]
fn simulate_and_run_subcommands() {
    let out = scratch("sim");
    let o = smc(&[
        "simulate",
        "--t-final",
        "2",
        "--stride",
        "100",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with("t,sigma,S,u_cmd,u_act,f\n"));
    assert_eq!(trace.lines().count(), 1 + 201);

    let cfg = out.join("exp.toml");
    std::fs::write(&cfg, "name = \"cli\"\npredictions = [\"chattering\", \"loeb\"]\n").unwrap();
    let o = smc(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("cli.report.json").exists());
    std::fs::remove_dir_all(out).ok();
}

#[test]
fn bad_arguments_exit_nonzero() {
    assert!(!smc(&["tables", "--table", "IV"]).status.success());
    assert!(!smc(&["predict", "--controller", "pid"]).status.success());
}
