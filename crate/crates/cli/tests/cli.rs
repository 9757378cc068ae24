use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_secir-ide"))
}

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

#[test]
fn simulate_ide_writes_csv() {
    let out = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["simulate-ide", "--config"])
        .arg(config("exponential_convergence.json"))
        .args(["--dt", "0.1", "--t-end", "2"])
        .arg("--out")
        .arg(out.path())
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    let stdout = String::from_utf8(status.stdout).unwrap();
    assert!(stdout.starts_with("simulate-ide: 20 steps"), "{stdout}");

    let csv = std::fs::read_to_string(out.path().join("ide.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,S,E,C,I,H,U,R,D,lambda,sigma_SE,sigma_EC,sigma_CI,sigma_CR,sigma_IH,sigma_IR,\
         sigma_HU,sigma_HR,sigma_UD,sigma_UR"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 21);
    let total: f64 = rows[20]
        .split(',')
        .skip(1)
        .take(8)
        .map(|v| v.parse::<f64>().unwrap())
        .sum();
    assert!((total - 10000.0).abs() < 1e-6);
}

#[test]
fn changepoint_and_ode_outputs() {
    let out = tempfile::tempdir().unwrap();
    let run = |args: &[&str]| {
        let o = bin()
            .args(args)
            .arg("--config")
            .arg(config("covid_changepoint.json"))
            .args(["--t-end", "3"])
            .arg("--out")
            .arg(out.path())
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8(o.stdout).unwrap()
    };
    assert!(run(&["changepoint"]).contains("jump IDE 0.5000"));
    assert!(out.path().join("changepoint_daily.csv").exists());
    assert!(run(&["simulate-ode"]).starts_with("simulate-ode: 300 steps"));
}

#[test]
fn errors_exit_nonzero_with_message() {
    let o = bin()
        .args(["scenario", "--config", "does-not-exist.json"])
        .output()
        .unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("config file not found"));

    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("covid_changepoint.json"))
        .unwrap()
        .replace("\"c_i\": 0.793099", "\"c_i\": 1.793099");
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, text).unwrap();
    let o = bin()
        .args(["simulate-ide", "--config"])
        .arg(&bad)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!o.status.success());
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("probabilities"), "{stderr}");

    let o = bin()
        .args(["convergence", "--config"])
        .arg(config("covid_changepoint.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("convergence: missing block"));
}
