//! Scenario presets, FD gain tuning and the controller comparison driver.

use std::thread;

use serde::{Deserialize, Serialize};

use crate::control::{self, GainMode, GainSet, LqrWeights};
use crate::metrics::{self, ComparisonTable, SignalId};
use crate::model::{assemble_state_space, PowerSystem, StateSpace};
use crate::sim::{simulate_closed_loop, ControllerMode, DisturbanceProfile, Scenario, Trajectory};
use crate::Error;

/// Horizon of the preset scenarios: 30 s beyond the slowest settling time.
pub const PRESET_HORIZON_S: f64 = 80.0;
/// Reference FD peak of the inter-area frequency difference (Hz).
pub const REFERENCE_FD_INTER_AREA_PEAK_HZ: f64 = 0.1011;
pub const KD_GRID_MIN: f64 = 0.1;
pub const KD_GRID_MAX: f64 = 20.0;
pub const KD_GRID_STEP: f64 = 0.05;
/// Horizon used to score each kd candidate.
pub const KD_TUNING_HORIZON_S: f64 = 40.0;

/// Load in area 1 drops to −0.01 p.u. at 5 s and is restored at 7 s.
pub fn step_load_disturbance() -> DisturbanceProfile {
    DisturbanceProfile::StepLoad { area: 0, magnitude_pu: -0.01, t_on_s: 5.0, t_off_s: 7.0 }
}

/// Short fault in area 1: twice the step-load amplitude, cleared after 0.1 s.
pub fn fault_disturbance() -> DisturbanceProfile {
    DisturbanceProfile::FaultPulse { area: 0, magnitude_pu: -0.02, t_on_s: 5.0, duration_s: 0.1 }
}

/// Data-center bursts in area 1 cycling between 0.03 and 0.18 p.u. over 0–40 s.
pub fn burst_disturbance() -> DisturbanceProfile {
    DisturbanceProfile::BurstLoad {
        area: 0,
        low_pu: 0.03,
        high_pu: 0.18,
        period_s: 4.0,
        duty: 0.5,
        t_start_s: 0.0,
        t_end_s: 40.0,
    }
}

pub const TWO_AREA_CONFIG: &str = include_str!("../configs/two_area.json");
/// Symmetric stand-in for a three-area interconnection (ring, identical areas).
pub const THREE_AREA_CONFIG: &str = include_str!("../configs/three_area.json");

/// End-to-end reproduction experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    /// Two-area step load, FD vs SF vs SDF, plus the PMU-noise SDF run.
    StepLoad,
    /// Two-area short fault.
    Fault,
    /// Three-area data-center burst load.
    Burst,
}

impl std::str::FromStr for Experiment {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "a" => Ok(Self::StepLoad),
            "b" => Ok(Self::Fault),
            "c" => Ok(Self::Burst),
            other => Err(format!("unknown experiment '{other}' (expected a, b or c)")),
        }
    }
}

impl Experiment {
    pub fn id(self) -> &'static str {
        match self {
            Self::StepLoad => "a",
            Self::Fault => "b",
            Self::Burst => "c",
        }
    }

    /// Controllers compared: baseline first.
    pub fn modes(self) -> &'static [ControllerMode] {
        match self {
            Self::StepLoad => &[ControllerMode::Fd, ControllerMode::Sf, ControllerMode::SdfExact, ControllerMode::SdfMeasured],
            Self::Fault | Self::Burst => &[ControllerMode::Fd, ControllerMode::SdfExact],
        }
    }

    pub fn signals(self) -> Vec<SignalId> {
        match self {
            Self::StepLoad | Self::Fault => SignalId::two_area_rows(),
            Self::Burst => SignalId::all_for(3),
        }
    }

    /// Noise-free preset configuration.
    pub fn config(self, seed: u64) -> crate::io::config::LoadedConfig {
        crate::io::config::build(self.doc(seed)).expect("preset configs validate")
    }

    /// Configuration for one controller of the experiment. The
    /// measured-derivative run sees PMU-grade noise.
    pub fn config_for(self, mode: ControllerMode, seed: u64) -> crate::io::config::LoadedConfig {
        let mut doc = self.doc(seed);
        doc.controller.mode = mode;
        doc.scenario.noise.enabled = mode == ControllerMode::SdfMeasured;
        crate::io::config::build(doc).expect("preset configs validate")
    }

    fn doc(self, seed: u64) -> crate::io::config::ConfigDoc {
        use crate::io::config::{parse_doc, DisturbanceDoc};
        let base = match self {
            Self::StepLoad | Self::Fault => TWO_AREA_CONFIG,
            Self::Burst => THREE_AREA_CONFIG,
        };
        let mut doc = parse_doc(base).expect("shipped configs parse");
        doc.scenario.horizon_s = PRESET_HORIZON_S;
        doc.scenario.noise.seed = seed;
        match self {
            Self::StepLoad => {}
            Self::Fault => {
                doc.scenario.disturbance =
                    DisturbanceDoc::FaultPulse { area: 1, magnitude_pu: -0.02, t_on_s: 5.0, duration_s: 0.1 };
            }
            Self::Burst => {
                doc.scenario.disturbance = DisturbanceDoc::BurstLoad {
                    area: 1,
                    low_pu: 0.03,
                    high_pu: 0.18,
                    period_s: 4.0,
                    duty: 0.5,
                    t_start_s: 0.0,
                    t_end_s: 40.0,
                };
            }
        }
        doc
    }
}

/// How the FD gain is chosen when none is given.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KdObjective {
    /// Match the reference FD inter-area peak `|Δf₂ − Δf₁|`.
    #[default]
    ReferencePeak,
    /// Minimize ∫(Δf₂ − Δf₁)² dt.
    InterAreaIse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdTuning {
    pub kd: f64,
    pub score: f64,
    /// Every `(kd, score)` pair evaluated, in grid order.
    pub evaluated: Vec<(f64, f64)>,
}

pub fn kd_grid() -> Vec<f64> {
    let n = ((KD_GRID_MAX - KD_GRID_MIN) / KD_GRID_STEP).round() as usize;
    // rounded to the grid's two decimals so gains print cleanly
    (0..=n).map(|k| ((KD_GRID_MIN + k as f64 * KD_GRID_STEP) * 100.0).round() / 100.0).collect()
}

fn kd_score(sys: &PowerSystem, ss: &StateSpace, kd: f64, objective: KdObjective) -> Result<f64, Error> {
    let ks = control::fd_gain(sys.n_areas(), sys.network().ties(), kd)?;
    let gains = GainSet { mode: GainMode::Fd, kd: Some(kd), ns: control_identity(sys), ks, sdf: None };
    let sc = Scenario::new(step_load_disturbance(), KD_TUNING_HORIZON_S, ControllerMode::Fd);
    let traj = simulate_closed_loop(ss, &gains, &sc)?;
    let diff = SignalId::FreqDiff { to: 1, from: 0 }.extract(&traj, sys.f_nom_hz())?;
    Ok(match objective {
        KdObjective::ReferencePeak => {
            let peak = metrics::peak_deviation(&traj.times, &diff, 0.0);
            (peak - REFERENCE_FD_INTER_AREA_PEAK_HZ).abs()
        }
        KdObjective::InterAreaIse => diff.iter().map(|v| v * v).sum::<f64>() * sc.dt_s,
    })
}

fn control_identity(sys: &PowerSystem) -> crate::matkit::Mat {
    crate::matkit::Mat::identity(sys.n_areas())
}

/// Grid search for the FD gain over `[0.1, 20]` in steps of 0.05, scoring
/// each candidate on the step-load scenario. Ties go to the smaller gain.
pub fn tune_fd_gain(sys: &PowerSystem, objective: KdObjective) -> Result<KdTuning, Error> {
    if sys.n_areas() < 2 {
        return Err(Error::Design("FD tuning needs at least two areas".into()));
    }
    let ss = assemble_state_space(sys);
    let grid = kd_grid();
    let workers = thread::available_parallelism().map_or(1, |n| n.get()).min(grid.len());
    let chunk = grid.len().div_ceil(workers);
    let scores: Vec<Result<f64, Error>> = thread::scope(|s| {
        let handles: Vec<_> = grid
            .chunks(chunk)
            .map(|part| {
                let ss = &ss;
                s.spawn(move || part.iter().map(|&kd| kd_score(sys, ss, kd, objective)).collect::<Vec<_>>())
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("tuning worker panicked")).collect()
    });
    let mut evaluated = Vec::with_capacity(grid.len());
    for (kd, score) in grid.iter().zip(scores) {
        evaluated.push((*kd, score?));
    }
    let (kd, score) = evaluated
        .iter()
        .copied()
        .fold((f64::NAN, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
    Ok(KdTuning { kd, score, evaluated })
}

/// Controller design inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerSpec {
    pub mode: ControllerMode,
    /// Fixed FD gain; tuned with `kd_objective` when absent.
    pub kd: Option<f64>,
    pub kd_objective: KdObjective,
    pub weights: LqrWeights,
}

impl ControllerSpec {
    pub fn default_for(sys: &PowerSystem, mode: ControllerMode) -> Self {
        Self { mode, kd: None, kd_objective: KdObjective::default(), weights: LqrWeights::default_for(sys.n_areas()) }
    }
}

/// Resolves the FD gain (given or tuned).
pub fn resolve_kd(sys: &PowerSystem, spec: &ControllerSpec) -> Result<f64, Error> {
    match spec.kd {
        Some(kd) => Ok(kd),
        None => Ok(tune_fd_gain(sys, spec.kd_objective)?.kd),
    }
}

/// Builds the gain set a controller mode needs. SDF modes fail when the
/// derivative transformation is undefined.
pub fn design_gains(sys: &PowerSystem, spec: &ControllerSpec, mode: ControllerMode) -> Result<GainSet, Error> {
    let ss = assemble_state_space(sys);
    match mode {
        ControllerMode::Fd => {
            let kd = resolve_kd(sys, spec)?;
            let ks = control::fd_gain(sys.n_areas(), sys.network().ties(), kd)?;
            Ok(GainSet::from_state_feedback(&ss, GainMode::Fd, ks, Some(kd)))
        }
        ControllerMode::Sf => {
            let ks = control::lqr_gain(&ss, &spec.weights)?;
            Ok(GainSet::from_state_feedback(&ss, GainMode::Sf, ks, None))
        }
        ControllerMode::SdfExact | ControllerMode::SdfMeasured => {
            let ks = control::lqr_gain(&ss, &spec.weights)?;
            let ns = crate::matkit::Mat::identity(sys.n_areas());
            let sdf = control::sdf_from_sf(&ss, &ks, &ns)?;
            Ok(GainSet { mode: GainMode::Sdf, kd: None, ks, ns, sdf: Some(sdf) })
        }
    }
}

/// One simulated controller run.
#[derive(Debug, Clone)]
pub struct Run {
    pub mode: ControllerMode,
    pub gains: GainSet,
    pub trajectory: Trajectory,
}

/// Designs and simulates each mode on its own thread; results keep the input order.
pub fn run_modes(
    sys: &PowerSystem,
    spec: &ControllerSpec,
    scenario: &Scenario,
    modes: &[ControllerMode],
) -> Result<Vec<Run>, Error> {
    // Tune once up front so parallel FD runs do not repeat the grid search.
    let mut spec = spec.clone();
    if modes.contains(&ControllerMode::Fd) && spec.kd.is_none() {
        spec.kd = Some(resolve_kd(sys, &spec)?);
    }
    let ss = assemble_state_space(sys);
    thread::scope(|s| {
        let handles: Vec<_> = modes
            .iter()
            .map(|&mode| {
                let (spec, ss) = (&spec, &ss);
                s.spawn(move || -> Result<Run, Error> {
                    let gains = design_gains(sys, spec, mode)?;
                    let trajectory = simulate_closed_loop(ss, &gains, &scenario.with_controller(mode))?;
                    Ok(Run { mode, gains, trajectory })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("simulation worker panicked")).collect()
    })
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub table: ComparisonTable,
    pub base: Run,
    pub test: Run,
}

/// Runs `base` and `test` on the same scenario and tabulates `signals`.
pub fn compare(
    sys: &PowerSystem,
    spec: &ControllerSpec,
    scenario: &Scenario,
    base: ControllerMode,
    test: ControllerMode,
    signals: &[SignalId],
) -> Result<Comparison, Error> {
    let mut runs = run_modes(sys, spec, scenario, &[base, test])?.into_iter();
    let (b, t) = (runs.next().expect("base run"), runs.next().expect("test run"));
    let table = ComparisonTable::from_trajectories(
        base.label(),
        &b.trajectory,
        test.label(),
        &t.trajectory,
        signals,
        sys.f_nom_hz(),
        scenario.disturbance.onset_s(),
    )?;
    Ok(Comparison { table, base: b, test: t })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spans_documented_range() {
        let g = kd_grid();
        assert_eq!(g.len(), 399);
        assert_eq!(g[0], 0.1);
        assert!((g[g.len() - 1] - 20.0).abs() < 1e-9);
    }

    #[test]
    fn preset_disturbances_are_valid() {
        for d in [step_load_disturbance(), fault_disturbance(), burst_disturbance()] {
            d.validate(2).unwrap();
        }
        assert_eq!(fault_disturbance().onset_s(), 5.0);
    }

    #[test]
    fn presets_match_scenario_builders() {
        assert_eq!(Experiment::StepLoad.config(1).scenario.disturbance, step_load_disturbance());
        assert_eq!(Experiment::Fault.config(1).scenario.disturbance, fault_disturbance());
        assert_eq!(Experiment::Burst.config(1).scenario.disturbance, burst_disturbance());
        assert_eq!(Experiment::Burst.config(1).system.n_areas(), 3);
        assert!(!Experiment::StepLoad.config(4).scenario.noise.enabled);
        assert!(Experiment::StepLoad.config_for(ControllerMode::SdfMeasured, 4).scenario.noise.enabled);
        assert!(!Experiment::StepLoad.config_for(ControllerMode::Sf, 4).scenario.noise.enabled);
        assert_eq!(Experiment::StepLoad.config(4).seed(), 4);
    }

    #[test]
    fn tuning_rejects_single_area() {
        let net = crate::model::TieNetwork::new(1, vec![], vec![0.1]).unwrap();
        let sys = PowerSystem::new(vec![crate::model::AreaParams::new(6.0, 1.2).unwrap()], net, 60.0).unwrap();
        assert!(tune_fd_gain(&sys, KdObjective::ReferencePeak).is_err());
    }
}
