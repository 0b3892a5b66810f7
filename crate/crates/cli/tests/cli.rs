use std::path::Path;
use std::process::{Command, Output};

fn sigma2(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sigma2")).args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

#[test]
fn eps_at_or_beyond_the_maximum_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    for eps in ["0.67", "5", "-0.1"] {
        let o = sigma2(&["orbit", "--eps", eps], dir.path());
        assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(code(&sigma2(&["orbit", "--tol", "2"], dir.path())), 2);
    assert_eq!(code(&sigma2(&["solve-mode", "--l", "9"], dir.path())), 2);
    assert_eq!(code(&sigma2(&["verify", "--suite", "bogus"], dir.path())), 2);
}

#[test]
fn orbit_output_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        assert_eq!(code(&sigma2(&["orbit", "--eps", "0.2", "--tmax", "6"], d.path())), 0);
    }
    for f in ["orbit.json", "report.json"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(a.path().join("report.json")).unwrap()).unwrap();
    assert!(report["relative_drift"].as_f64().unwrap() < 1e-8);
}

#[test]
fn sweep_writes_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let o = sigma2(&["orbit", "--sweep", "eps=0.2,0.1,0.05", "--format", "csv", "--tmax", "8"], dir.path());
    assert_eq!(code(&o), 0);
    let table = std::fs::read_to_string(dir.path().join("neck_ratios.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "eps,ratio_v,ratio_vdot,ratio_vddot");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("2.0000000000000001e-1,"));
    for e in ["0.2", "0.1", "0.05"] {
        assert!(dir.path().join(format!("orbit_eps{e}.csv")).exists());
    }
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "eps = 0.3\ntmax = 5\nformat = \"csv\"\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    assert_eq!(code(&sigma2(&["orbit", "--config", cfg, "--eps", "0.15"], dir.path())), 0);
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["params"]["eps"].as_f64(), Some(0.15));
    assert_eq!(report["tmax"].as_f64(), Some(5.0));
    assert!(dir.path().join("orbit.csv").exists());
}

#[test]
fn verify_reports_each_suite() {
    let dir = tempfile::tempdir().unwrap();
    let o = sigma2(&["verify", "--suite", "jacobi,energy"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("PASS jacobi") && stdout.contains("PASS energy"));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], serde_json::Value::Bool(true));
    assert_eq!(report["suites"].as_array().unwrap().len(), 2);
}

#[test]
fn glue_outside_the_neck_is_a_solver_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = sigma2(&["glue"], dir.path());
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("admissible domain"));
}

#[test]
fn glue_inside_the_neck_matches() {
    let dir = tempfile::tempdir().unwrap();
    let o = sigma2(&["glue", "--eps", "0.01", "--s", "0.5", "--format", "csv"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("glue_report.json")).unwrap()).unwrap();
    assert!(report["completeness_min"].as_f64().unwrap() > 0.0);
    assert!(std::fs::read_to_string(dir.path().join("glue_factor.csv")).unwrap().starts_with("r,U\n"));
}

#[test]
fn glue_eps_sweep_table_decreases() {
    let dir = tempfile::tempdir().unwrap();
    let o = sigma2(&["glue", "--s", "0.5", "--eps-sweep", "0.025,0.0125,0.00625", "--format", "csv"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("strictly decreasing: true"));
    let table = std::fs::read_to_string(dir.path().join("glue_sweep.csv")).unwrap();
    let dist: Vec<f64> = table.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(dist.len(), 3);
    assert!(dist.windows(2).all(|w| w[1] < w[0]));
}
