use std::path::PathBuf;
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/configs").join(name)
}

fn oscidamp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oscidamp")).args(args).env_remove("OSCIDAMP_SEED").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn verify_passes_on_shipped_config() {
    let o = oscidamp(&["verify", "--config", config("two_area.json").to_str().unwrap(), "--samples", "50"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(!stdout(&o).contains("[FAIL]"));
}

#[test]
fn verify_fails_on_singular_system() {
    let o = oscidamp(&["verify", "--config", config("two_area_eps0.json").to_str().unwrap(), "--samples", "10"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("[FAIL] regularity"));
}

#[test]
fn design_sdf_on_singular_system_cites_assumption() {
    let o = oscidamp(&["design", "--config", config("two_area_eps0.json").to_str().unwrap(), "--controller", "sdf"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("assumption (i)"), "{}", stderr(&o));
}

#[test]
fn design_prints_gains_and_assumptions() {
    let o = oscidamp(&["design", "--config", config("two_area.json").to_str().unwrap(), "--controller", "sdf"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["assumptions"]["a_nonsingular"], true);
    assert_eq!(v["gains"]["ks"].as_array().unwrap().len(), 2);
    assert!(v["gains"]["sdf"]["kn"].is_array());
}

#[test]
fn design_fd_with_fixed_gain() {
    let o = oscidamp(&["design", "--config", config("two_area.json").to_str().unwrap(), "--controller", "fd", "--kd", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["gains"]["kd"], 2.0);
    assert_eq!(v["gains"]["ks"][0], serde_json::json!([0.0, 0.0, 2.0, -2.0]));
}

#[test]
fn unknown_flag_is_usage_error() {
    let o = oscidamp(&["simulate", "--config", "x.json", "--frobnicate"]);
    assert_eq!(o.status.code(), Some(64));
    let o = oscidamp(&["launch"]);
    assert_eq!(o.status.code(), Some(64));
}

#[test]
fn missing_config_is_io_error() {
    let o = oscidamp(&["design", "--config", "/nonexistent/oscidamp.json"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn invalid_config_is_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let text = std::fs::read_to_string(config("two_area.json")).unwrap().replace("\"inertia_s\": 6.0", "\"inertia_s\": 0.0");
    std::fs::write(&path, text).unwrap();
    let o = oscidamp(&["design", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("system.areas[0].inertia_s"), "{}", stderr(&o));
}

#[test]
fn simulate_writes_decimated_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = oscidamp(&[
        "simulate",
        "--config",
        config("two_area.json").to_str().unwrap(),
        "--controller",
        "sf",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("trajectory_sf.csv")).unwrap();
    let rows = csv.lines().filter(|l| !l.starts_with('#')).count() - 1;
    // samples at 0..=80 s every 1 ms, every 10th kept
    assert_eq!(rows, 8001);
    assert!(csv.contains("# seed=1\n"));
    assert!(dir.path().join("trajectory_sf_metrics.csv").exists());
}

#[test]
fn sf_and_sdf_csvs_agree_row_wise() {
    let dir = tempfile::tempdir().unwrap();
    for c in ["sf", "sdf"] {
        let o = oscidamp(&[
            "simulate",
            "--config",
            config("two_area.json").to_str().unwrap(),
            "--controller",
            c,
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
    }
    let read = |name: &str| -> Vec<Vec<f64>> {
        std::fs::read_to_string(dir.path().join(name))
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with('#'))
            .skip(1)
            .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
            .collect()
    };
    let (a, b) = (read("trajectory_sf.csv"), read("trajectory_sdf_exact.csv"));
    assert_eq!(a.len(), b.len());
    let worst = a
        .iter()
        .zip(&b)
        .flat_map(|(r, s)| r[1..5].iter().zip(&s[1..5]).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);
    assert!(worst <= 1e-8, "{worst}");
}

#[test]
fn compare_reports_positive_improvements() {
    let dir = tempfile::tempdir().unwrap();
    let o = oscidamp(&[
        "compare",
        "--config",
        config("two_area.json").to_str().unwrap(),
        "--controllers",
        "fd,sdf",
        "--kd",
        "0.5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("comparison.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 5);
    for r in rows {
        let improvement: f64 = r.split(',').nth(5).unwrap().parse().unwrap();
        assert!(improvement > 0.0, "{r}");
    }
    assert!(stdout(&o).contains("Ref Peak(FD)"));
}

#[test]
fn seed_env_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_oscidamp"))
        .args(["simulate", "--config", config("two_area.json").to_str().unwrap(), "--controller", "sf", "--out"])
        .arg(dir.path())
        .env("OSCIDAMP_SEED", "42")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("trajectory_sf.csv")).unwrap();
    assert!(csv.contains("# seed=42\n"));

    let o = Command::new(env!("CARGO_BIN_EXE_oscidamp"))
        .args(["design", "--config", config("two_area.json").to_str().unwrap()])
        .env("OSCIDAMP_SEED", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}
