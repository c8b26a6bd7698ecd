//! N-area small-signal swing model.
//!
//! States are ordered `(Δδ₁..Δδ_N, Δω₁..Δω_N)` and inputs `u₁..u_N` throughout
//! the crate, including gain matrices and CSV columns.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::matkit::{self, Mat, MatError};

/// Nominal grid frequency used when none is given.
pub const DEFAULT_F_NOM_HZ: f64 = 60.0;

/// Self-stiffness values scanned by the regularity hint, lowest first.
pub const EPS_HINT_GRID: [f64; 8] = [0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09, 0.10];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error("tie-line graph is disconnected: area {0} is unreachable from area 1")]
    Disconnected(usize),
    #[error("regularity of A ({a_singular}) disagrees with regularity of T ({t_singular})")]
    InconsistentRegularity { a_singular: bool, t_singular: bool },
    #[error(transparent)]
    Mat(#[from] MatError),
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ModelError {
    ModelError::Invalid { field: field.into(), message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AreaParams {
    /// Aggregate inertia constant M_i in seconds.
    pub inertia_s: f64,
    /// Damping coefficient D_i in p.u.
    pub damping_pu: f64,
}

impl AreaParams {
    pub fn new(inertia_s: f64, damping_pu: f64) -> Result<Self, ModelError> {
        if !(inertia_s.is_finite() && inertia_s > 0.0) {
            return Err(invalid("inertia_s", format!("must be finite and > 0, got {inertia_s}")));
        }
        if !(damping_pu.is_finite() && damping_pu >= 0.0) {
            return Err(invalid("damping_pu", format!("must be finite and >= 0, got {damping_pu}")));
        }
        Ok(Self { inertia_s, damping_pu })
    }
}

/// Undirected tie-line between areas `i` and `j` (0-based).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TieLine {
    pub i: usize,
    pub j: usize,
    /// Synchronizing torque coefficient T_ij, p.u. torque per radian.
    pub coeff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TieNetwork {
    n_areas: usize,
    ties: Vec<TieLine>,
    stiffness_eps: Vec<f64>,
}

impl TieNetwork {
    /// Validates and normalizes a tie list. Each unordered pair may appear
    /// once, or twice with equal coefficients (both directions listed).
    pub fn new(n_areas: usize, ties: Vec<TieLine>, stiffness_eps: Vec<f64>) -> Result<Self, ModelError> {
        if n_areas == 0 {
            return Err(invalid("n_areas", "at least one area is required"));
        }
        if stiffness_eps.len() != n_areas {
            return Err(invalid(
                "stiffness_eps",
                format!("expected {n_areas} entries, got {}", stiffness_eps.len()),
            ));
        }
        for (k, e) in stiffness_eps.iter().enumerate() {
            if !(e.is_finite() && *e >= 0.0) {
                return Err(invalid(format!("stiffness_eps[{k}]"), format!("must be finite and >= 0, got {e}")));
            }
        }
        let mut pairs: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (k, tie) in ties.iter().enumerate() {
            let field = format!("ties[{k}]");
            if tie.i >= n_areas || tie.j >= n_areas {
                return Err(invalid(field, format!("area index out of range for {n_areas} areas")));
            }
            if tie.i == tie.j {
                return Err(invalid(field, "self-loop tie-line"));
            }
            if !(tie.coeff.is_finite() && tie.coeff > 0.0) {
                return Err(invalid(field, format!("coefficient must be finite and > 0, got {}", tie.coeff)));
            }
            let key = (tie.i.min(tie.j), tie.i.max(tie.j));
            match pairs.get(&key) {
                Some(&c) if c != tie.coeff => {
                    return Err(invalid(field, format!("asymmetric coefficient: T_ij = {c}, T_ji = {}", tie.coeff)));
                }
                Some(_) if ties[..k].iter().any(|t| (t.i, t.j) == (tie.i, tie.j)) => {
                    return Err(invalid(field, "duplicate tie-line"));
                }
                _ => {
                    pairs.insert(key, tie.coeff);
                }
            }
        }
        let ties: Vec<TieLine> = pairs.into_iter().map(|((i, j), coeff)| TieLine { i, j, coeff }).collect();
        let net = Self { n_areas, ties, stiffness_eps };
        if let Some(unreached) = net.first_unreachable() {
            return Err(ModelError::Disconnected(unreached + 1));
        }
        Ok(net)
    }

    fn first_unreachable(&self) -> Option<usize> {
        let mut seen = vec![false; self.n_areas];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(a) = stack.pop() {
            for t in &self.ties {
                let other = if t.i == a {
                    t.j
                } else if t.j == a {
                    t.i
                } else {
                    continue;
                };
                if !seen[other] {
                    seen[other] = true;
                    stack.push(other);
                }
            }
        }
        seen.iter().position(|s| !s)
    }

    pub fn n_areas(&self) -> usize {
        self.n_areas
    }

    /// Normalized ties with `i < j`, sorted.
    pub fn ties(&self) -> &[TieLine] {
        &self.ties
    }

    pub fn stiffness_eps(&self) -> &[f64] {
        &self.stiffness_eps
    }

    pub fn with_stiffness(&self, stiffness_eps: Vec<f64>) -> Result<Self, ModelError> {
        Self::new(self.n_areas, self.ties.clone(), stiffness_eps)
    }

    /// Σ_j T_ij for each area.
    pub fn degrees(&self) -> Vec<f64> {
        let mut deg = vec![0.0; self.n_areas];
        for t in &self.ties {
            deg[t.i] += t.coeff;
            deg[t.j] += t.coeff;
        }
        deg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerSystem {
    areas: Vec<AreaParams>,
    network: TieNetwork,
    f_nom_hz: f64,
}

impl PowerSystem {
    pub fn new(areas: Vec<AreaParams>, network: TieNetwork, f_nom_hz: f64) -> Result<Self, ModelError> {
        if areas.len() != network.n_areas() {
            return Err(invalid(
                "areas",
                format!("{} areas given for a {}-area network", areas.len(), network.n_areas()),
            ));
        }
        if !(f_nom_hz.is_finite() && f_nom_hz > 0.0) {
            return Err(invalid("f_nom_hz", format!("must be > 0, got {f_nom_hz}")));
        }
        for (k, a) in areas.iter().enumerate() {
            AreaParams::new(a.inertia_s, a.damping_pu).map_err(|e| match e {
                ModelError::Invalid { field, message } => invalid(format!("areas[{k}].{field}"), message),
                other => other,
            })?;
        }
        Ok(Self { areas, network, f_nom_hz })
    }

    /// Identical areas, one tie coefficient and one ε, joined by the 0-based
    /// pairs in `ties`.
    pub fn uniform(
        n: usize,
        inertia_s: f64,
        damping_pu: f64,
        ties: &[(usize, usize)],
        coeff: f64,
        eps: f64,
    ) -> Result<Self, ModelError> {
        let area = AreaParams::new(inertia_s, damping_pu)?;
        let ties = ties.iter().map(|&(i, j)| TieLine { i, j, coeff }).collect();
        let net = TieNetwork::new(n, ties, vec![eps; n])?;
        Self::new(vec![area; n], net, DEFAULT_F_NOM_HZ)
    }

    pub fn n_areas(&self) -> usize {
        self.areas.len()
    }

    pub fn areas(&self) -> &[AreaParams] {
        &self.areas
    }

    pub fn network(&self) -> &TieNetwork {
        &self.network
    }

    pub fn f_nom_hz(&self) -> f64 {
        self.f_nom_hz
    }

    pub fn with_network(&self, network: TieNetwork) -> Result<Self, ModelError> {
        Self::new(self.areas.clone(), network, self.f_nom_hz)
    }
}

/// Linear plant `ẋ = a·x + b·(u + ΔP)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: Mat,
    pub b: Mat,
}

impl StateSpace {
    /// Generic constructor; only shapes are checked. Power-system plants come
    /// from [`assemble_state_space`].
    pub fn new(a: Mat, b: Mat) -> Result<Self, ModelError> {
        if !a.is_square() || b.rows() != a.rows() {
            return Err(invalid(
                "state_space",
                format!("a is {}x{}, b is {}x{}", a.rows(), a.cols(), b.rows(), b.cols()),
            ));
        }
        Ok(Self { a, b })
    }

    pub fn n_states(&self) -> usize {
        self.a.rows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.cols()
    }

    /// Number of areas for a power-system plant (equal to the input count).
    pub fn n_areas(&self) -> usize {
        self.b.cols()
    }
}

/// Synchronizing torque matrix: tie-line Laplacian plus the self-stiffness
/// diagonal `T̃_ii = ε_i·Σ_j T_ij`.
pub fn build_torque_matrix(net: &TieNetwork) -> Mat {
    let n = net.n_areas();
    let mut t = Mat::zeros(n, n);
    for tie in net.ties() {
        t[(tie.i, tie.j)] -= tie.coeff;
        t[(tie.j, tie.i)] -= tie.coeff;
        t[(tie.i, tie.i)] += tie.coeff;
        t[(tie.j, tie.j)] += tie.coeff;
    }
    for (i, (deg, eps)) in net.degrees().iter().zip(net.stiffness_eps()).enumerate() {
        t[(i, i)] += eps * deg;
    }
    t
}

/// `a = [[0, I], [−M⁻¹T, −M⁻¹D]]`, `b = [[0], [M⁻¹]]`.
pub fn assemble_state_space(sys: &PowerSystem) -> StateSpace {
    let n = sys.n_areas();
    let t = build_torque_matrix(sys.network());
    let mut a = Mat::zeros(2 * n, 2 * n);
    let mut b = Mat::zeros(2 * n, n);
    for i in 0..n {
        let area = sys.areas()[i];
        a[(i, n + i)] = 1.0;
        for j in 0..n {
            a[(n + i, j)] = -t[(i, j)] / area.inertia_s;
        }
        a[(n + i, n + i)] = -area.damping_pu / area.inertia_s;
        b[(n + i, i)] = 1.0 / area.inertia_s;
    }
    StateSpace { a, b }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularityReport {
    pub a_singular: bool,
    pub t_singular: bool,
    /// Smallest uniform ε from [`EPS_HINT_GRID`] that regularizes T when it
    /// is singular (applied as `max(ε_i, ε)` per area).
    pub eps_hint: Option<f64>,
}

/// Checks that A and T are singular together and suggests a self-stiffness
/// level when they are.
pub fn check_regularity(ss: &StateSpace, net: &TieNetwork) -> Result<RegularityReport, ModelError> {
    let t = build_torque_matrix(net);
    let a_singular = matkit::rank_deficient(&ss.a, matkit::RANK_TOL);
    let t_singular = matkit::rank_deficient(&t, matkit::RANK_TOL);
    if a_singular != t_singular {
        return Err(ModelError::InconsistentRegularity { a_singular, t_singular });
    }
    let eps_hint = if t_singular {
        EPS_HINT_GRID.iter().copied().find(|&eps| {
            let raised: Vec<f64> = net.stiffness_eps().iter().map(|e| e.max(eps)).collect();
            net.with_stiffness(raised)
                .map(|n| !matkit::rank_deficient(&build_torque_matrix(&n), matkit::RANK_TOL))
                .unwrap_or(false)
        })
    } else {
        None
    };
    Ok(RegularityReport { a_singular, t_singular, eps_hint })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_area(eps: f64) -> PowerSystem {
        PowerSystem::uniform(2, 6.0, 1.2, &[(0, 1)], 3.132, eps).unwrap()
    }

    fn three_area_ring(eps: f64) -> PowerSystem {
        PowerSystem::uniform(3, 6.0, 1.2, &[(0, 1), (1, 2), (0, 2)], 3.132, eps).unwrap()
    }

    #[test]
    fn torque_matrix_examples() {
        let t = build_torque_matrix(two_area(0.0).network());
        assert_eq!(t, Mat::from_rows(&[[3.132, -3.132], [-3.132, 3.132]]));
        let t = build_torque_matrix(two_area(0.05).network());
        assert_abs_diff_eq!(t[(0, 0)], 3.2886, epsilon = 1e-12);
        assert_abs_diff_eq!(t[(1, 1)], 3.2886, epsilon = 1e-12);
        assert_eq!(t[(0, 1)], -3.132);
        let single = TieNetwork::new(1, vec![], vec![0.0]).unwrap();
        assert_eq!(build_torque_matrix(&single), Mat::zeros(1, 1));
    }

    #[test]
    fn assembled_two_area_matches_hand_values() {
        let ss = assemble_state_space(&two_area(0.0));
        let expect = [
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [-0.522, 0.522, -0.2, 0.0],
            [0.522, -0.522, 0.0, -0.2],
        ];
        for (i, row) in expect.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert_abs_diff_eq!(ss.a[(i, j)], *v, epsilon = 1e-12);
            }
        }
        assert_eq!(ss.b.get_block(2, 0, 2, 2), Mat::diag(&[1.0 / 6.0, 1.0 / 6.0]));
        assert_eq!(ss.b.get_block(0, 0, 2, 2), Mat::zeros(2, 2));

        let ss = assemble_state_space(&two_area(0.05));
        assert_abs_diff_eq!(ss.a[(2, 0)], -0.5481, epsilon = 1e-12);
        assert_abs_diff_eq!(ss.a[(2, 1)], 0.522, epsilon = 1e-12);
    }

    #[test]
    fn single_area_double_integrator() {
        let net = TieNetwork::new(1, vec![], vec![0.0]).unwrap();
        let sys = PowerSystem::new(vec![AreaParams::new(6.0, 0.0).unwrap()], net, 60.0).unwrap();
        let ss = assemble_state_space(&sys);
        assert_eq!(ss.a, Mat::from_rows(&[[0.0, 1.0], [0.0, 0.0]]));
    }

    #[test]
    fn regularity_examples() {
        let sys = two_area(0.0);
        let r = check_regularity(&assemble_state_space(&sys), sys.network()).unwrap();
        assert!(r.a_singular && r.t_singular);
        assert_eq!(r.eps_hint, Some(0.03));

        let sys = two_area(0.05);
        let r = check_regularity(&assemble_state_space(&sys), sys.network()).unwrap();
        assert_eq!((r.a_singular, r.t_singular, r.eps_hint), (false, false, None));

        let sys = three_area_ring(0.03);
        let r = check_regularity(&assemble_state_space(&sys), sys.network()).unwrap();
        assert_eq!((r.a_singular, r.t_singular), (false, false));
    }

    #[test]
    fn inconsistent_regularity_is_reported() {
        // A from a regularized network checked against the bare Laplacian.
        let ss = assemble_state_space(&two_area(0.05));
        let err = check_regularity(&ss, two_area(0.0).network()).unwrap_err();
        assert_eq!(err, ModelError::InconsistentRegularity { a_singular: false, t_singular: true });
    }

    #[test]
    fn network_validation() {
        let tie = |i, j, coeff| TieLine { i, j, coeff };
        assert!(matches!(TieNetwork::new(2, vec![tie(0, 0, 1.0)], vec![0.0; 2]), Err(ModelError::Invalid { .. })));
        assert!(matches!(TieNetwork::new(3, vec![tie(0, 1, 1.0)], vec![0.0; 3]), Err(ModelError::Disconnected(3))));
        assert!(TieNetwork::new(2, vec![tie(0, 1, 1.0), tie(1, 0, 2.0)], vec![0.0; 2]).is_err());
        assert!(TieNetwork::new(2, vec![tie(0, 1, 1.0), tie(0, 1, 1.0)], vec![0.0; 2]).is_err());
        let both = TieNetwork::new(2, vec![tie(0, 1, 1.0), tie(1, 0, 1.0)], vec![0.0; 2]).unwrap();
        assert_eq!(both.ties().len(), 1);
        assert!(TieNetwork::new(2, vec![tie(0, 1, -1.0)], vec![0.0; 2]).is_err());
        assert!(TieNetwork::new(2, vec![tie(0, 1, 1.0)], vec![0.0]).is_err());
        assert!(AreaParams::new(0.0, 1.0).is_err());
    }

    #[test]
    fn b_has_full_column_rank() {
        let ss = assemble_state_space(&three_area_ring(0.0));
        let btb = &ss.b.transpose() * &ss.b;
        assert!(!matkit::rank_deficient(&btb, matkit::RANK_TOL));
    }
}
