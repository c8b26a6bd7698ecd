//! Invariant and property checks run by `oscidamp verify` and the test suites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::control::{self, GainMode, GainSet, LqrWeights, CARE_RESIDUAL_TOL};
use crate::io::config::{self, LoadedConfig};
use crate::matkit::{self, Mat};
use crate::metrics::trajectory_distance;
use crate::model::{assemble_state_space, build_torque_matrix, AreaParams, PowerSystem, TieLine, TieNetwork};
use crate::sim::{simulate_closed_loop, ControllerMode};

pub const EQUIVALENCE_TOL: f64 = 1e-8;
pub const ROUND_TRIP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.to_string(), passed, detail }
    }
}

/// Random two- or three-area system. About a third of the draws have every
/// ε at zero, so singular cases are well represented.
pub fn random_system(rng: &mut impl Rng, n: usize) -> PowerSystem {
    assert!(n == 2 || n == 3, "random systems have two or three areas");
    let areas =
        (0..n).map(|_| AreaParams::new(rng.random_range(2.0..12.0), rng.random_range(0.5..2.5)).unwrap()).collect();
    let mut pairs = vec![(0, 1)];
    if n == 3 {
        pairs.push((1, 2));
        if rng.random_bool(0.5) {
            pairs.push((0, 2));
        }
    }
    let ties = pairs.into_iter().map(|(i, j)| TieLine { i, j, coeff: rng.random_range(0.5..5.0) }).collect();
    let eps = match rng.random_range(0..3) {
        0 => vec![0.0; n],
        1 => (0..n).map(|_| if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.01..0.2) }).collect(),
        _ => (0..n).map(|_| rng.random_range(0.01..0.2)).collect(),
    };
    let net = TieNetwork::new(n, ties, eps).unwrap();
    PowerSystem::new(areas, net, crate::model::DEFAULT_F_NOM_HZ).unwrap()
}

/// Random system with every ε > 0, hence A nonsingular.
pub fn random_regular_system(rng: &mut impl Rng, n: usize) -> PowerSystem {
    let sys = random_system(rng, n);
    let eps = (0..n).map(|_| rng.random_range(0.01..0.2)).collect();
    sys.with_network(sys.network().with_stiffness(eps).unwrap()).unwrap()
}

/// LQR gain for random diagonal weights.
pub fn random_stabilizing_gain(rng: &mut impl Rng, sys: &PowerSystem) -> Result<Mat, control::ControlError> {
    let n = sys.n_areas();
    let q: Vec<f64> = (0..2 * n).map(|_| rng.random_range(0.1..20.0)).collect();
    let r: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..5.0)).collect();
    control::lqr_gain(&assemble_state_space(sys), &LqrWeights::from_diagonals(&q, &r)?)
}

/// Count of systems where `rank_deficient(A) != rank_deficient(T)`, and how
/// many of the systems were singular.
pub fn regularity_sweep(seed: u64, count: usize) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut mismatches, mut singular) = (0, 0);
    for k in 0..count {
        let sys = random_system(&mut rng, 2 + k % 2);
        let a = matkit::rank_deficient(&assemble_state_space(&sys).a, matkit::RANK_TOL);
        let t = matkit::rank_deficient(&build_torque_matrix(sys.network()), matkit::RANK_TOL);
        mismatches += usize::from(a != t);
        singular += usize::from(t);
    }
    (mismatches, singular)
}

/// Largest relative gain round-trip error `‖K_eff − Ks‖∞ / ‖Ks‖∞`.
pub fn round_trip_sweep(seed: u64, count: usize) -> Result<f64, crate::Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for k in 0..count {
        let sys = random_regular_system(&mut rng, 2 + k % 2);
        let ss = assemble_state_space(&sys);
        let ks = random_stabilizing_gain(&mut rng, &sys)?;
        let sdf = control::sdf_from_sf(&ss, &ks, &Mat::identity(sys.n_areas()))?;
        let keff = control::effective_sdf_gain(&ss, &sdf.kn)?;
        worst = worst.max((&keff - &ks).norm_inf() / ks.norm_inf());
    }
    Ok(worst)
}

/// Runs every check against `cfg`. `samples` sizes the randomized sweeps.
pub fn run_suite(cfg: &LoadedConfig, seed: u64, samples: usize) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let sys = &cfg.system;
    let ss = assemble_state_space(sys);

    let again = config::parse_config(&cfg.to_json());
    out.push(CheckResult::new(
        "config_round_trip",
        again.as_ref().is_ok_and(|c| c == cfg),
        "load -> serialize -> load".into(),
    ));

    match crate::model::check_regularity(&ss, sys.network()) {
        Ok(r) => out.push(CheckResult::new(
            "regularity",
            !r.a_singular,
            format!("A singular: {}, T singular: {}, eps hint: {:?}", r.a_singular, r.t_singular, r.eps_hint),
        )),
        Err(e) => out.push(CheckResult::new("regularity", false, e.to_string())),
    }

    let lqr = control::lqr_design(&ss, &cfg.controller.weights, None);
    match &lqr {
        Ok(sol) => {
            let bound = CARE_RESIDUAL_TOL * cfg.controller.weights.q().norm_inf();
            out.push(CheckResult::new(
                "care_residual",
                sol.residual <= bound,
                format!("residual {:.3e} <= {:.3e} after {} iterations", sol.residual, bound, sol.iterations),
            ));
            let closed = &ss.a - &(&ss.b * &sol.gain);
            out.push(CheckResult::new("closed_loop_hurwitz", matkit::is_hurwitz(&closed), "A - B*Ks".into()));
            let report = control::validate_assumptions(&ss, &sol.gain);
            out.push(CheckResult::new("assumptions", report.all_hold(), format!("{report:?}")));
        }
        Err(e) => out.push(CheckResult::new("care_residual", false, e.to_string())),
    }

    if let Ok(sol) = &lqr {
        let ks = sol.gain.clone();
        let gains = GainSet::from_state_feedback(&ss, GainMode::Sdf, ks.clone(), None);
        match &gains.sdf {
            Some(sdf) => {
                let rt = control::effective_sdf_gain(&ss, &sdf.kn)
                    .map(|k| (&k - &ks).norm_inf() / ks.norm_inf());
                out.push(match rt {
                    Ok(err) => CheckResult::new(
                        "gain_round_trip",
                        err <= ROUND_TRIP_TOL,
                        format!("relative error {err:.3e} <= {ROUND_TRIP_TOL:e}"),
                    ),
                    Err(e) => CheckResult::new("gain_round_trip", false, e.to_string()),
                });
                let mut sc = cfg.scenario.clone();
                sc.noise.enabled = false;
                let sf = simulate_closed_loop(&ss, &gains, &sc.with_controller(ControllerMode::Sf));
                let sdf_run = simulate_closed_loop(&ss, &gains, &sc.with_controller(ControllerMode::SdfExact));
                out.push(match (sf, sdf_run) {
                    (Ok(a), Ok(b)) => match trajectory_distance(&a, &b) {
                        Ok(d) => CheckResult::new(
                            "sf_sdf_equivalence",
                            d.states <= EQUIVALENCE_TOL && d.controls <= EQUIVALENCE_TOL,
                            format!("states {:.3e}, controls {:.3e} (tol {EQUIVALENCE_TOL:e})", d.states, d.controls),
                        ),
                        Err(e) => CheckResult::new("sf_sdf_equivalence", false, e.to_string()),
                    },
                    (Err(e), _) | (_, Err(e)) => CheckResult::new("sf_sdf_equivalence", false, e.to_string()),
                });
            }
            None => out.push(CheckResult::new(
                "gain_round_trip",
                false,
                "derivative transformation undefined for this system".into(),
            )),
        }
    }

    let (mismatches, singular) = regularity_sweep(seed, samples);
    out.push(CheckResult::new(
        "a_iff_t_singular",
        mismatches == 0,
        format!("{mismatches} mismatches over {samples} systems ({singular} singular)"),
    ));
    out.push(match round_trip_sweep(seed.wrapping_add(1), samples) {
        Ok(worst) => CheckResult::new(
            "random_gain_round_trip",
            worst <= ROUND_TRIP_TOL,
            format!("worst relative error {worst:.3e} over {samples} systems"),
        ),
        Err(e) => CheckResult::new("random_gain_round_trip", false, e.to_string()),
    });
    out
}
