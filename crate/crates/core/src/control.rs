//! Controller design: frequency-difference (FD) baseline, LQR state feedback
//! and its state-derivative (SDF) counterpart.
//!
//! The SDF gains follow from a stabilizing state-feedback gain `Ks`:
//!
//! ```text
//! Kn = Ks (A − B Ks)⁻¹
//! Nn = (I + Kn B) Ns
//! ```
//!
//! and `u = −Kn ẋ + Kn B ΔP` reproduces `u = −Ks x` on `ẋ = Ax + B(u + ΔP)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matkit::{self, Mat, MatError};
use crate::model::{StateSpace, TieLine};

pub const NK_MAX_ITERS: usize = 50;
pub const NK_GAIN_TOL: f64 = 1e-10;
pub const CARE_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("no stabilizing seed gain found for the Riccati iteration")]
    NotStabilizable,
    #[error("Newton-Kleinman iteration did not converge in {iterations} steps (last gain change {last_step:.3e}, CARE residual {residual:.3e})")]
    NoConvergence { iterations: usize, last_step: f64, residual: f64 },
    #[error("assumption (i) violated: the state matrix A is singular; SDF design needs self-stiffness (stiffness_eps > 0)")]
    SingularA,
    #[error("assumption (ii) violated: A - B*Ks is singular")]
    SingularClosedLoop,
    #[error("I + Kn*B is singular; the derivative feedback loop has no unique solution")]
    SingularLoop,
    #[error(transparent)]
    Mat(#[from] MatError),
}

/// Quadratic cost weights for the LQR design.
#[derive(Debug, Clone, PartialEq)]
pub struct LqrWeights {
    q: Mat,
    r: Mat,
}

impl LqrWeights {
    pub fn new(q: Mat, r: Mat) -> Result<Self, ControlError> {
        matkit::check_symmetric(&q, matkit::SYMMETRY_TOL)?;
        let shifted = &q + &Mat::identity(q.rows()).scale(1e-9 * (1.0 + q.norm_inf()));
        if !matkit::is_positive_definite(&shifted)? {
            return Err(ControlError::Invalid("Q must be positive semidefinite".into()));
        }
        if !matkit::is_positive_definite(&r)? {
            return Err(ControlError::Invalid("R must be positive definite".into()));
        }
        Ok(Self { q, r })
    }

    pub fn from_diagonals(q_diag: &[f64], r_diag: &[f64]) -> Result<Self, ControlError> {
        Self::new(Mat::diag(q_diag), Mat::diag(r_diag))
    }

    /// Angles weighted 10, speeds 1, `R = 2I`, in grouped state order.
    pub fn default_for(n_areas: usize) -> Self {
        let (q, r) = default_weight_diagonals(n_areas);
        Self::from_diagonals(&q, &r).expect("default weights are valid")
    }

    pub fn q(&self) -> &Mat {
        &self.q
    }

    pub fn r(&self) -> &Mat {
        &self.r
    }
}

pub fn default_weight_diagonals(n_areas: usize) -> (Vec<f64>, Vec<f64>) {
    let q = (0..2 * n_areas).map(|k| if k < n_areas { 10.0 } else { 1.0 }).collect();
    (q, vec![2.0; n_areas])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainMode {
    Fd,
    Sf,
    Sdf,
}

/// State-derivative gains derived from a state-feedback design.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SdfGains {
    pub kn: Mat,
    pub nn: Mat,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainSet {
    pub mode: GainMode,
    /// FD scalar gain, when the set came from [`fd_gain`].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kd: Option<f64>,
    pub ks: Mat,
    pub ns: Mat,
    /// Present whenever assumptions (i) and (ii) hold for `ks`.
    pub sdf: Option<SdfGains>,
}

impl GainSet {
    /// Wraps a state-feedback gain with `Ns = I` and attaches the SDF gains
    /// when the transformation is defined.
    pub fn from_state_feedback(ss: &StateSpace, mode: GainMode, ks: Mat, kd: Option<f64>) -> Self {
        let ns = Mat::identity(ss.n_inputs());
        let sdf = sdf_from_sf(ss, &ks, &ns).ok();
        Self { mode, kd, ks, ns, sdf }
    }
}

/// `[0 | kd·L]` with `L` the unweighted tie-line graph Laplacian.
pub fn fd_gain(n_areas: usize, ties: &[TieLine], kd: f64) -> Result<Mat, ControlError> {
    if !(kd.is_finite() && kd > 0.0) {
        return Err(ControlError::Invalid(format!("kd must be > 0, got {kd}")));
    }
    let mut k = Mat::zeros(n_areas, 2 * n_areas);
    for t in ties {
        if t.i >= n_areas || t.j >= n_areas || t.i == t.j {
            return Err(ControlError::Invalid(format!("bad tie ({}, {})", t.i, t.j)));
        }
        k[(t.i, n_areas + t.j)] -= kd;
        k[(t.j, n_areas + t.i)] -= kd;
        k[(t.i, n_areas + t.i)] += kd;
        k[(t.j, n_areas + t.j)] += kd;
    }
    Ok(k)
}

/// Full result of an LQR design.
#[derive(Debug, Clone)]
pub struct LqrSolution {
    pub gain: Mat,
    /// Stabilizing CARE solution.
    pub p: Mat,
    pub iterations: usize,
    /// ‖AᵀP + PA − PBR⁻¹BᵀP + Q‖∞.
    pub residual: f64,
}

pub fn care_residual(ss: &StateSpace, w: &LqrWeights, p: &Mat) -> Result<f64, ControlError> {
    let at = ss.a.transpose();
    let bt = ss.b.transpose();
    let rinv_bt_p = matkit::lu_solve(w.r(), &(&bt * p))?;
    let quad = &(p * &ss.b) * &rinv_bt_p;
    let res = &(&(&(&at * p) + &(p * &ss.a)) - &quad) + w.q();
    Ok(res.norm_inf())
}

/// LQR gain `Ks = R⁻¹BᵀP` from Newton–Kleinman iteration.
pub fn lqr_gain(ss: &StateSpace, w: &LqrWeights) -> Result<Mat, ControlError> {
    lqr_design(ss, w, None).map(|s| s.gain)
}

/// Newton–Kleinman CARE solve. Uses `seed` when given, else `K₀ = 0` if the
/// open loop is Hurwitz, else a Bass shifted-Lyapunov stabilizing gain.
pub fn lqr_design(ss: &StateSpace, w: &LqrWeights, seed: Option<&Mat>) -> Result<LqrSolution, ControlError> {
    let n = ss.n_states();
    let m = ss.n_inputs();
    if w.q().rows() != n || w.r().rows() != m {
        return Err(ControlError::Invalid(format!(
            "weights are {}x{} / {}x{} for a plant with {n} states and {m} inputs",
            w.q().rows(),
            w.q().cols(),
            w.r().rows(),
            w.r().cols()
        )));
    }
    let mut k = match seed {
        Some(k0) => k0.clone(),
        None => stabilizing_seed(ss)?,
    };
    if !matkit::is_hurwitz(&(&ss.a - &(&ss.b * &k))) {
        return Err(ControlError::NotStabilizable);
    }

    let rinv_bt = matkit::lu_solve(w.r(), &ss.b.transpose())?;
    let mut last_step = f64::INFINITY;
    for it in 1..=NK_MAX_ITERS {
        let closed = &ss.a - &(&ss.b * &k);
        let cost = w.q() + &(&(&k.transpose() * w.r()) * &k);
        let p = matkit::lyapunov_solve(&closed, &cost)?;
        let next = &rinv_bt * &p;
        last_step = (&next - &k).norm_inf();
        k = next;
        if last_step < NK_GAIN_TOL {
            let p = final_riccati(ss, w, &k)?;
            let residual = care_residual(ss, w, &p)?;
            let bound = CARE_RESIDUAL_TOL * w.q().norm_inf().max(1e-12);
            if residual > bound {
                return Err(ControlError::NoConvergence { iterations: it, last_step, residual });
            }
            return Ok(LqrSolution { gain: k, p, iterations: it, residual });
        }
    }
    let p = final_riccati(ss, w, &k)?;
    let residual = care_residual(ss, w, &p)?;
    Err(ControlError::NoConvergence { iterations: NK_MAX_ITERS, last_step, residual })
}

fn final_riccati(ss: &StateSpace, w: &LqrWeights, k: &Mat) -> Result<Mat, ControlError> {
    let closed = &ss.a - &(&ss.b * k);
    let cost = w.q() + &(&(&k.transpose() * w.r()) * k);
    Ok(matkit::lyapunov_solve(&closed, &cost)?)
}

fn stabilizing_seed(ss: &StateSpace) -> Result<Mat, ControlError> {
    let zero = Mat::zeros(ss.n_inputs(), ss.n_states());
    if matkit::is_hurwitz(&ss.a) {
        return Ok(zero);
    }
    // Bass: (A + βI)Z + Z(A + βI)ᵀ = 2BBᵀ, K = BᵀZ⁻¹ puts every pole at Re = −β.
    let n = ss.n_states();
    let beta = ss.a.norm_inf() + 1.0;
    let shifted = &ss.a + &Mat::identity(n).scale(beta);
    let f = shifted.transpose().scale(-1.0);
    let q = (&ss.b * &ss.b.transpose()).scale(2.0);
    let z = matkit::lyapunov_solve(&f, &q).map_err(|_| ControlError::NotStabilizable)?;
    if !matkit::is_positive_definite(&z).unwrap_or(false) {
        return Err(ControlError::NotStabilizable);
    }
    let zinv_b = matkit::lu_solve(&z, &ss.b).map_err(|_| ControlError::NotStabilizable)?;
    Ok(zinv_b.transpose())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AssumptionReport {
    /// (i) A nonsingular.
    pub a_nonsingular: bool,
    /// (ii) A − B·Ks nonsingular.
    pub closed_loop_nonsingular: bool,
    /// (iii) B has full column rank.
    pub b_full_column_rank: bool,
}

impl AssumptionReport {
    pub fn all_hold(&self) -> bool {
        self.a_nonsingular && self.closed_loop_nonsingular && self.b_full_column_rank
    }
}

pub fn validate_assumptions(ss: &StateSpace, ks: &Mat) -> AssumptionReport {
    let tol = matkit::RANK_TOL;
    let closed = &ss.a - &(&ss.b * ks);
    let btb = &ss.b.transpose() * &ss.b;
    AssumptionReport {
        a_nonsingular: !matkit::rank_deficient(&ss.a, tol),
        closed_loop_nonsingular: !matkit::rank_deficient(&closed, tol),
        b_full_column_rank: !matkit::rank_deficient(&btb, tol),
    }
}

/// `Kn = Ks(A − BKs)⁻¹`, `Nn = (I + KnB)Ns`.
pub fn sdf_from_sf(ss: &StateSpace, ks: &Mat, ns: &Mat) -> Result<SdfGains, ControlError> {
    if ks.rows() != ss.n_inputs() || ks.cols() != ss.n_states() {
        return Err(ControlError::Invalid(format!(
            "ks is {}x{}, expected {}x{}",
            ks.rows(),
            ks.cols(),
            ss.n_inputs(),
            ss.n_states()
        )));
    }
    if matkit::rank_deficient(&ss.a, matkit::RANK_TOL) {
        return Err(ControlError::SingularA);
    }
    let closed = &ss.a - &(&ss.b * ks);
    if matkit::rank_deficient(&closed, matkit::RANK_TOL) {
        return Err(ControlError::SingularClosedLoop);
    }
    let inv = matkit::inverse(&closed).map_err(|_| ControlError::SingularClosedLoop)?;
    let kn = ks * &inv;
    let loop_gain = &Mat::identity(ss.n_inputs()) + &(&kn * &ss.b);
    let nn = &loop_gain * ns;
    Ok(SdfGains { kn, nn })
}

/// Resolves `u = −Kn(Ax + Bu)` into `u = −K_eff x` with
/// `K_eff = (I + KnB)⁻¹ Kn A`.
pub fn effective_sdf_gain(ss: &StateSpace, kn: &Mat) -> Result<Mat, ControlError> {
    let loop_gain = &Mat::identity(ss.n_inputs()) + &(kn * &ss.b);
    if matkit::rank_deficient(&loop_gain, matkit::RANK_TOL) {
        return Err(ControlError::SingularLoop);
    }
    matkit::lu_solve(&loop_gain, &(kn * &ss.a)).map_err(|_| ControlError::SingularLoop)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{assemble_state_space, PowerSystem};
    use approx::assert_abs_diff_eq;

    fn scalar() -> StateSpace {
        StateSpace::new(Mat::from_rows(&[[-1.0]]), Mat::from_rows(&[[1.0]])).unwrap()
    }

    fn two_area(eps: f64) -> (PowerSystem, StateSpace) {
        let sys = PowerSystem::uniform(2, 6.0, 1.2, &[(0, 1)], 3.132, eps).unwrap();
        let ss = assemble_state_space(&sys);
        (sys, ss)
    }

    #[test]
    fn fd_gain_examples() {
        let ties = [TieLine { i: 0, j: 1, coeff: 3.132 }];
        let k = fd_gain(2, &ties, 0.5).unwrap();
        assert_eq!(k, Mat::from_rows(&[[0.0, 0.0, 0.5, -0.5], [0.0, 0.0, -0.5, 0.5]]));
        let ring: Vec<TieLine> = [(0, 1), (1, 2), (0, 2)].iter().map(|&(i, j)| TieLine { i, j, coeff: 1.0 }).collect();
        let k = fd_gain(3, &ring, 1.0).unwrap();
        assert_eq!(k.get_block(0, 3, 3, 3), Mat::from_rows(&[[2.0, -1.0, -1.0], [-1.0, 2.0, -1.0], [-1.0, -1.0, 2.0]]));
        assert_eq!(k.get_block(0, 0, 3, 3), Mat::zeros(3, 3));
        assert!(fd_gain(2, &ties, 0.0).is_err());
    }

    #[test]
    fn fd_ignores_uniform_speed_offsets() {
        let ring: Vec<TieLine> = [(0, 1), (1, 2), (0, 2)].iter().map(|&(i, j)| TieLine { i, j, coeff: 1.0 }).collect();
        let k = fd_gain(3, &ring, 2.5).unwrap();
        let u = k.mul_vec(&[0.3, -0.1, 0.2, 0.7, 0.7, 0.7]);
        assert!(u.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn scalar_lqr_closed_form() {
        let w = LqrWeights::from_diagonals(&[1.0], &[1.0]).unwrap();
        let k = lqr_gain(&scalar(), &w).unwrap();
        assert_abs_diff_eq!(k[(0, 0)], 2f64.sqrt() - 1.0, epsilon = 1e-10);
    }

    #[test]
    fn zero_state_cost_gives_zero_gain() {
        let (_, ss) = two_area(0.05);
        let w = LqrWeights::from_diagonals(&[0.0; 4], &[2.0, 2.0]).unwrap();
        let k = lqr_gain(&ss, &w).unwrap();
        assert_eq!(k.max_abs(), 0.0);
    }

    #[test]
    fn two_area_lqr_residual_and_stability() {
        let (_, ss) = two_area(0.05);
        let w = LqrWeights::default_for(2);
        let sol = lqr_design(&ss, &w, None).unwrap();
        assert!(sol.residual <= 1e-8 * w.q().norm_inf());
        assert!(matkit::is_hurwitz(&(&ss.a - &(&ss.b * &sol.gain))));
    }

    #[test]
    fn unstable_plant_uses_bass_seed() {
        let ss = StateSpace::new(
            Mat::from_rows(&[[0.0, 1.0], [2.0, -0.1]]),
            Mat::from_rows(&[[0.0], [1.0]]),
        )
        .unwrap();
        let w = LqrWeights::from_diagonals(&[1.0, 1.0], &[1.0]).unwrap();
        let sol = lqr_design(&ss, &w, None).unwrap();
        assert!(sol.residual <= 1e-8);
        assert!(matkit::is_hurwitz(&(&ss.a - &(&ss.b * &sol.gain))));
    }

    #[test]
    fn uncontrollable_unstable_plant_is_rejected() {
        let ss = StateSpace::new(
            Mat::from_rows(&[[1.0, 0.0], [0.0, -1.0]]),
            Mat::from_rows(&[[0.0], [1.0]]),
        )
        .unwrap();
        let w = LqrWeights::from_diagonals(&[1.0, 1.0], &[1.0]).unwrap();
        assert_eq!(lqr_design(&ss, &w, None).unwrap_err(), ControlError::NotStabilizable);
    }

    #[test]
    fn weights_validation() {
        assert!(LqrWeights::from_diagonals(&[1.0, -1.0], &[1.0]).is_err());
        assert!(LqrWeights::from_diagonals(&[1.0, 1.0], &[0.0]).is_err());
        let (q, r) = default_weight_diagonals(3);
        assert_eq!(q, vec![10.0, 10.0, 10.0, 1.0, 1.0, 1.0]);
        assert_eq!(r, vec![2.0; 3]);
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn sdf_examples() {
        let ss = scalar();
        let g = sdf_from_sf(&ss, &Mat::zeros(1, 1), &Mat::identity(1)).unwrap();
        assert_eq!(g.kn, Mat::zeros(1, 1));
        assert_eq!(g.nn, Mat::identity(1));

        let ks = 2f64.sqrt() - 1.0;
        let g = sdf_from_sf(&ss, &Mat::from_rows(&[[ks]]), &Mat::identity(1)).unwrap();
        // kn = k / (a − b k)
        assert_abs_diff_eq!(g.kn[(0, 0)], ks / (-1.0 - ks), epsilon = 1e-15);
        assert_abs_diff_eq!(g.kn[(0, 0)], -0.292893, epsilon = 1e-6);
        assert_abs_diff_eq!(g.nn[(0, 0)], 0.707107, epsilon = 1e-6);

        let (_, ss0) = two_area(0.0);
        let any = Mat::from_rows(&[[1.0, 0.0, 2.0, 0.0], [0.0, 1.0, 0.0, 2.0]]);
        assert_eq!(sdf_from_sf(&ss0, &any, &Mat::identity(2)).unwrap_err(), ControlError::SingularA);
    }

    #[test]
    fn sdf_rejects_singular_closed_loop() {
        // a − b·ks = 0
        let ss = scalar();
        let err = sdf_from_sf(&ss, &Mat::from_rows(&[[-1.0]]), &Mat::identity(1)).unwrap_err();
        assert_eq!(err, ControlError::SingularClosedLoop);
    }

    #[test]
    fn assumption_reports() {
        let (_, ss) = two_area(0.05);
        let ks = lqr_gain(&ss, &LqrWeights::default_for(2)).unwrap();
        assert!(validate_assumptions(&ss, &ks).all_hold());

        let (_, ss0) = two_area(0.0);
        let r = validate_assumptions(&ss0, &Mat::zeros(2, 4));
        assert!(!r.a_nonsingular && r.b_full_column_rank);

        let mut b = ss.b.clone();
        b[(3, 1)] = 0.0;
        let degenerate = StateSpace::new(ss.a.clone(), b).unwrap();
        assert!(!validate_assumptions(&degenerate, &Mat::zeros(2, 4)).b_full_column_rank);
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn effective_gain_examples() {
        let ss = scalar();
        assert_eq!(effective_sdf_gain(&ss, &Mat::zeros(1, 1)).unwrap(), Mat::zeros(1, 1));
        let k = effective_sdf_gain(&ss, &Mat::from_rows(&[[-0.292893]])).unwrap();
        assert_abs_diff_eq!(k[(0, 0)], 0.292893 / 0.707107, epsilon = 1e-12);
        assert_abs_diff_eq!(k[(0, 0)], 0.414214, epsilon = 1e-6);
        assert_eq!(effective_sdf_gain(&ss, &Mat::from_rows(&[[-1.0]])).unwrap_err(), ControlError::SingularLoop);
    }

    #[test]
    fn two_area_round_trip() {
        let (_, ss) = two_area(0.05);
        let ks = lqr_gain(&ss, &LqrWeights::default_for(2)).unwrap();
        let g = sdf_from_sf(&ss, &ks, &Mat::identity(2)).unwrap();
        let keff = effective_sdf_gain(&ss, &g.kn).unwrap();
        assert!(keff.max_abs_diff(&ks) <= 1e-9 * ks.norm_inf());
    }

    #[test]
    fn fd_gain_admits_sdf_transform_when_regularized() {
        let (sys, ss) = two_area(0.05);
        let ks = fd_gain(2, sys.network().ties(), 0.5).unwrap();
        let g = GainSet::from_state_feedback(&ss, GainMode::Fd, ks.clone(), Some(0.5));
        let sdf = g.sdf.expect("transform defined");
        assert!(effective_sdf_gain(&ss, &sdf.kn).unwrap().max_abs_diff(&ks) <= 1e-9);
    }
}
