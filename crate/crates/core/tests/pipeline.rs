use std::path::PathBuf;

use oscidamp::experiment::{self, Experiment, KdObjective};
use oscidamp::io::config::{load_config, ConfigError};
use oscidamp::io::csv::{emit_csv, CsvHeader};
use oscidamp::metrics::{trajectory_distance, SignalId};
use oscidamp::model::{assemble_state_space, check_regularity};
use oscidamp::{ControllerMode, Error};

fn shipped(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

#[test]
fn shipped_configs_load() {
    for name in ["two_area.json", "three_area.json", "two_area_eps0.json"] {
        let cfg = load_config(shipped(name)).unwrap();
        assert_eq!(cfg.fingerprint().len(), 64);
        assert_eq!(cfg.fingerprint(), load_config(shipped(name)).unwrap().fingerprint());
    }
}

#[test]
fn missing_file_is_io_error() {
    let err = load_config("/definitely/not/here.json").unwrap_err();
    assert!(matches!(err, ConfigError::Io { .. }));
    assert_eq!(Error::from(err).exit_code(), oscidamp::exit::IO);
}

#[test]
fn singular_config_gets_stiffness_hint() {
    let cfg = load_config(shipped("two_area_eps0.json")).unwrap();
    let r = check_regularity(&assemble_state_space(&cfg.system), cfg.system.network()).unwrap();
    assert!(r.a_singular && r.t_singular);
    assert_eq!(r.eps_hint, Some(0.03));
}

#[test]
fn sdf_design_on_singular_system_is_numerical_failure() {
    let cfg = load_config(shipped("two_area_eps0.json")).unwrap();
    let err = experiment::design_gains(&cfg.system, &cfg.controller, ControllerMode::SdfExact).unwrap_err();
    assert_eq!(err.exit_code(), oscidamp::exit::NUMERICAL);
    assert!(err.to_string().contains("assumption (i)"));
}

#[test]
fn three_area_sf_and_sdf_agree() {
    let cfg = Experiment::Burst.config(1);
    let runs = experiment::run_modes(
        &cfg.system,
        &cfg.controller,
        &cfg.scenario,
        &[ControllerMode::Sf, ControllerMode::SdfExact],
    )
    .unwrap();
    let d = trajectory_distance(&runs[0].trajectory, &runs[1].trajectory).unwrap();
    assert!(d.states <= 1e-8 && d.controls <= 1e-8, "{d:?}");
}

#[test]
fn reference_peak_tuning_lands_on_half() {
    let cfg = load_config(shipped("two_area.json")).unwrap();
    let t = experiment::tune_fd_gain(&cfg.system, KdObjective::ReferencePeak).unwrap();
    assert_eq!(t.kd, 0.5);
    assert_eq!(t.evaluated.len(), experiment::kd_grid().len());
}

#[test]
fn emitted_csv_is_deterministic() {
    let cfg = Experiment::StepLoad.config_for(ControllerMode::SdfMeasured, 3);
    let dir = tempfile::tempdir().unwrap();
    let header = CsvHeader {
        config_sha256: cfg.fingerprint(),
        seed: cfg.seed(),
        dt_s: cfg.scenario.dt_s,
        controller: "sdf_measured".into(),
        f_nom_hz: 60.0,
    };
    let mut files = Vec::new();
    for k in 0..2 {
        let mut sc = cfg.scenario.clone();
        sc.horizon_s = 10.0;
        let run = experiment::run_modes(&cfg.system, &cfg.controller, &sc, &[ControllerMode::SdfMeasured]).unwrap();
        let path = dir.path().join(format!("run{k}.csv"));
        emit_csv(&run[0].trajectory, &path, 10, &header).unwrap();
        files.push(std::fs::read(path).unwrap());
    }
    assert_eq!(files[0], files[1]);
    let text = String::from_utf8(files.remove(0)).unwrap();
    assert!(text.contains("# seed=3\n"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 1001);
}

#[test]
fn comparison_rows_follow_signal_order() {
    let cfg = load_config(shipped("two_area.json")).unwrap();
    let mut spec = cfg.controller.clone();
    spec.kd = Some(0.5);
    let cmp = experiment::compare(
        &cfg.system,
        &spec,
        &cfg.scenario,
        ControllerMode::Fd,
        ControllerMode::SdfExact,
        &SignalId::two_area_rows(),
    )
    .unwrap();
    let keys: Vec<String> = cmp.table.rows.iter().map(|r| r.signal.key()).collect();
    assert_eq!(keys, ["delta_1", "delta_2", "f_1", "f_2", "f_21"]);
    assert_eq!(cmp.base.gains.kd, Some(0.5));
}
