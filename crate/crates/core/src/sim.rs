//! Fixed-step closed-loop simulation with disturbance profiles and a
//! sample-and-hold PMU measurement model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{self, ControlError, GainSet};
use crate::matkit::Mat;
use crate::model::StateSpace;

/// State magnitude treated as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e6;
pub const DEFAULT_DT_S: f64 = 1e-3;
pub const DEFAULT_PMU_RATE_HZ: f64 = 60.0;
/// 3σ_f ≤ 0.005 Hz.
pub const DEFAULT_SIGMA_F_HZ: f64 = 0.005 / 3.0;
/// 3σ_δ ≤ 0.573°, in radians.
pub const DEFAULT_SIGMA_DELTA_RAD: f64 = 0.573 * std::f64::consts::PI / 180.0 / 3.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("simulation diverged at t = {time_s} s")]
    Diverged { time_s: f64 },
    #[error("I + Kn*B is singular; the derivative feedback loop has no unique solution")]
    SingularLoop,
    #[error("controller mode {0:?} needs SDF gains, but the gain set has none")]
    MissingSdfGains(ControllerMode),
    #[error(transparent)]
    Control(#[from] ControlError),
}

/// Power-balance disturbance ΔP(t) acting on a single area (0-based).
#[derive(Debug, Clone, PartialEq, Default)]
pub enum DisturbanceProfile {
    #[default]
    None,
    /// `magnitude` on `[t_on, t_off)`.
    StepLoad { area: usize, magnitude_pu: f64, t_on_s: f64, t_off_s: f64 },
    /// `magnitude` on `[t_on, t_on + duration)`.
    FaultPulse { area: usize, magnitude_pu: f64, t_on_s: f64, duration_s: f64 },
    /// Square wave inside `[t_start, t_end]`: `high` for the first `duty`
    /// fraction of each period, `low` for the rest.
    BurstLoad { area: usize, low_pu: f64, high_pu: f64, period_s: f64, duty: f64, t_start_s: f64, t_end_s: f64 },
}

impl DisturbanceProfile {
    pub fn validate(&self, n_areas: usize) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Invalid(m));
        let area = match *self {
            Self::None => return Ok(()),
            Self::StepLoad { area, magnitude_pu, t_on_s, t_off_s } => {
                if !(t_on_s.is_finite() && t_off_s.is_finite() && magnitude_pu.is_finite()) {
                    return bad("step load parameters must be finite".into());
                }
                if t_off_s <= t_on_s {
                    return bad(format!("step load needs t_off > t_on, got {t_on_s}..{t_off_s}"));
                }
                area
            }
            Self::FaultPulse { area, magnitude_pu, t_on_s, duration_s } => {
                if !(t_on_s.is_finite() && duration_s.is_finite() && magnitude_pu.is_finite()) {
                    return bad("fault parameters must be finite".into());
                }
                if duration_s <= 0.0 {
                    return bad(format!("fault duration must be > 0, got {duration_s}"));
                }
                area
            }
            Self::BurstLoad { area, low_pu, high_pu, period_s, duty, t_start_s, t_end_s } => {
                if ![low_pu, high_pu, period_s, duty, t_start_s, t_end_s].iter().all(|v| v.is_finite()) {
                    return bad("burst parameters must be finite".into());
                }
                if high_pu <= low_pu {
                    return bad(format!("burst needs high > low, got {low_pu}/{high_pu}"));
                }
                if !(duty > 0.0 && duty < 1.0) {
                    return bad(format!("burst duty must lie in (0, 1), got {duty}"));
                }
                if period_s <= 0.0 {
                    return bad(format!("burst period must be > 0, got {period_s}"));
                }
                if t_end_s < t_start_s {
                    return bad(format!("burst window is empty: {t_start_s}..{t_end_s}"));
                }
                area
            }
        };
        if area >= n_areas {
            return bad(format!("disturbance area {} out of range for {n_areas} areas", area + 1));
        }
        Ok(())
    }

    /// Time from which the disturbance can be nonzero.
    pub fn onset_s(&self) -> f64 {
        match *self {
            Self::None => 0.0,
            Self::StepLoad { t_on_s, .. } | Self::FaultPulse { t_on_s, .. } => t_on_s,
            Self::BurstLoad { t_start_s, .. } => t_start_s,
        }
    }

    /// Scalar ΔP on the affected area and that area's index.
    fn value_at(&self, t: f64) -> Option<(usize, f64)> {
        match *self {
            Self::None => None,
            Self::StepLoad { area, magnitude_pu, t_on_s, t_off_s } => {
                Some((area, if t >= t_on_s && t < t_off_s { magnitude_pu } else { 0.0 }))
            }
            Self::FaultPulse { area, magnitude_pu, t_on_s, duration_s } => {
                Some((area, if t >= t_on_s && t < t_on_s + duration_s { magnitude_pu } else { 0.0 }))
            }
            Self::BurstLoad { area, low_pu, high_pu, period_s, duty, t_start_s, t_end_s } => {
                if t < t_start_s || t > t_end_s {
                    return Some((area, 0.0));
                }
                let phase = (t - t_start_s).rem_euclid(period_s);
                Some((area, if phase < duty * period_s { high_pu } else { low_pu }))
            }
        }
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        if let Some((area, v)) = self.value_at(t) {
            out[area] = v;
        }
    }
}

/// ΔP(t) per area.
pub fn eval_disturbance(p: &DisturbanceProfile, t: f64, n_areas: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_areas];
    p.eval_into(t, &mut out);
    out
}

/// Gaussian PMU error model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub enabled: bool,
    pub sigma_f_hz: f64,
    pub sigma_delta_rad: f64,
    pub sigma_rocof_hz_per_s: f64,
    pub pmu_rate_hz: f64,
    pub seed: u64,
    /// Nominal frequency for the Hz → p.u. speed conversion.
    pub f_nom_hz: f64,
}

impl NoiseSpec {
    /// RoCoF error of a first difference between two independent frequency frames.
    pub fn derived_sigma_rocof(sigma_f_hz: f64, pmu_rate_hz: f64) -> f64 {
        sigma_f_hz * pmu_rate_hz * std::f64::consts::SQRT_2
    }

    /// Noise at the PMU steady-state accuracy limits.
    pub fn pmu_grade(seed: u64) -> Self {
        Self { enabled: true, seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        for (name, v) in [
            ("sigma_f_hz", self.sigma_f_hz),
            ("sigma_delta_rad", self.sigma_delta_rad),
            ("sigma_rocof_hz_per_s", self.sigma_rocof_hz_per_s),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(SimError::Invalid(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(self.pmu_rate_hz.is_finite() && self.pmu_rate_hz > 0.0) {
            return Err(SimError::Invalid(format!("pmu_rate_hz must be > 0, got {}", self.pmu_rate_hz)));
        }
        if !(self.f_nom_hz.is_finite() && self.f_nom_hz > 0.0) {
            return Err(SimError::Invalid(format!("f_nom_hz must be > 0, got {}", self.f_nom_hz)));
        }
        Ok(())
    }
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            enabled: false,
            sigma_f_hz: DEFAULT_SIGMA_F_HZ,
            sigma_delta_rad: DEFAULT_SIGMA_DELTA_RAD,
            sigma_rocof_hz_per_s: Self::derived_sigma_rocof(DEFAULT_SIGMA_F_HZ, DEFAULT_PMU_RATE_HZ),
            pmu_rate_hz: DEFAULT_PMU_RATE_HZ,
            seed: 1,
            f_nom_hz: crate::model::DEFAULT_F_NOM_HZ,
        }
    }
}

/// Which feedback law drives the plant. The FD gain itself lives in the
/// [`GainSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerMode {
    Fd,
    Sf,
    /// Derivative feedback with the algebraic loop solved exactly.
    SdfExact,
    /// Derivative feedback on sample-held PMU derivatives.
    SdfMeasured,
}

impl ControllerMode {
    pub fn label(self) -> &'static str {
        match self {
            Self::Fd => "fd",
            Self::Sf => "sf",
            Self::SdfExact => "sdf_exact",
            Self::SdfMeasured => "sdf_measured",
        }
    }
}

impl std::str::FromStr for ControllerMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "fd" => Ok(Self::Fd),
            "sf" => Ok(Self::Sf),
            "sdf" | "sdf_exact" => Ok(Self::SdfExact),
            "sdf_measured" => Ok(Self::SdfMeasured),
            other => Err(format!("unknown controller '{other}' (expected fd, sf, sdf, sdf_exact, sdf_measured)")),
        }
    }
}

/// Source of the ΔP estimate used by the derivative feedforward term.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Feedforward {
    #[default]
    TrueValue,
    Delayed { lag_s: f64 },
    Off,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub disturbance: DisturbanceProfile,
    pub noise: NoiseSpec,
    pub horizon_s: f64,
    pub dt_s: f64,
    pub controller: ControllerMode,
    pub feedforward: Feedforward,
}

impl Scenario {
    pub fn new(disturbance: DisturbanceProfile, horizon_s: f64, controller: ControllerMode) -> Self {
        Self {
            disturbance,
            noise: NoiseSpec::default(),
            horizon_s,
            dt_s: DEFAULT_DT_S,
            controller,
            feedforward: Feedforward::TrueValue,
        }
    }

    pub fn with_controller(&self, controller: ControllerMode) -> Self {
        Self { controller, ..self.clone() }
    }

    pub fn validate(&self, n_areas: usize) -> Result<(), SimError> {
        if !(self.horizon_s.is_finite() && self.horizon_s > 0.0) {
            return Err(SimError::Invalid(format!("horizon must be > 0, got {}", self.horizon_s)));
        }
        if !(self.dt_s.is_finite() && self.dt_s > 0.0) {
            return Err(SimError::Invalid(format!("dt must be > 0, got {}", self.dt_s)));
        }
        self.noise.validate()?;
        if self.noise.enabled && self.dt_s > 0.5 / self.noise.pmu_rate_hz {
            return Err(SimError::Invalid(format!(
                "dt = {} s is coarser than half a PMU frame ({} s)",
                self.dt_s,
                0.5 / self.noise.pmu_rate_hz
            )));
        }
        if let Feedforward::Delayed { lag_s } = self.feedforward {
            if !(lag_s.is_finite() && lag_s >= 0.0) {
                return Err(SimError::Invalid(format!("feedforward lag must be >= 0, got {lag_s}")));
            }
        }
        self.disturbance.validate(n_areas)
    }

    pub fn n_steps(&self) -> usize {
        (self.horizon_s / self.dt_s + 1e-9).floor() as usize
    }
}

/// Sampled closed-loop run. Per-step vectors are stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub n_areas: usize,
    pub dt_s: f64,
    pub times: Vec<f64>,
    /// `2N` states per step: Δδ (rad) then Δω (p.u.).
    pub states: Vec<f64>,
    /// `N` control inputs per step (p.u.).
    pub controls: Vec<f64>,
    /// `4N` per step: measured state followed by measured derivative.
    pub measured: Vec<f64>,
    /// `N` applied ΔP per step (p.u.).
    pub dp: Vec<f64>,
}

impl Trajectory {
    fn with_capacity(n_areas: usize, dt_s: f64, len: usize) -> Self {
        Self {
            n_areas,
            dt_s,
            times: Vec::with_capacity(len),
            states: Vec::with_capacity(len * 2 * n_areas),
            controls: Vec::with_capacity(len * n_areas),
            measured: Vec::with_capacity(len * 4 * n_areas),
            dp: Vec::with_capacity(len * n_areas),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        let w = 2 * self.n_areas;
        &self.states[k * w..(k + 1) * w]
    }

    pub fn control(&self, k: usize) -> &[f64] {
        &self.controls[k * self.n_areas..(k + 1) * self.n_areas]
    }

    pub fn measured(&self, k: usize) -> &[f64] {
        let w = 4 * self.n_areas;
        &self.measured[k * w..(k + 1) * w]
    }

    pub fn disturbance(&self, k: usize) -> &[f64] {
        &self.dp[k * self.n_areas..(k + 1) * self.n_areas]
    }

    /// Time series of one state component.
    pub fn state_series(&self, idx: usize) -> Vec<f64> {
        self.states.iter().skip(idx).step_by(2 * self.n_areas).copied().collect()
    }

    pub fn control_series(&self, idx: usize) -> Vec<f64> {
        self.controls.iter().skip(idx).step_by(self.n_areas).copied().collect()
    }

    pub fn horizon_s(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }
}

/// Classical RK4 with buffers reused across steps.
struct Rk4 {
    bv: Vec<f64>,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Rk4 {
    fn new(n: usize) -> Self {
        Self { bv: vec![0.0; n], k: std::array::from_fn(|_| vec![0.0; n]), tmp: vec![0.0; n] }
    }

    fn deriv(a: &Mat, bv: &[f64], x: &[f64], out: &mut [f64]) {
        a.mul_vec_into(x, out);
        out.iter_mut().zip(bv).for_each(|(o, b)| *o += b);
    }

    fn step(&mut self, ss: &StateSpace, x: &mut [f64], v: &[f64], h: f64) {
        ss.b.mul_vec_into(v, &mut self.bv);
        let [k1, k2, k3, k4] = &mut self.k;
        Self::deriv(&ss.a, &self.bv, x, k1);
        for (t, (xi, ki)) in self.tmp.iter_mut().zip(x.iter().zip(k1.iter())) {
            *t = xi + 0.5 * h * ki;
        }
        Self::deriv(&ss.a, &self.bv, &self.tmp, k2);
        for (t, (xi, ki)) in self.tmp.iter_mut().zip(x.iter().zip(k2.iter())) {
            *t = xi + 0.5 * h * ki;
        }
        Self::deriv(&ss.a, &self.bv, &self.tmp, k3);
        for (t, (xi, ki)) in self.tmp.iter_mut().zip(x.iter().zip(k3.iter())) {
            *t = xi + h * ki;
        }
        Self::deriv(&ss.a, &self.bv, &self.tmp, k4);
        for i in 0..x.len() {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
}

fn check_bounded(x: &[f64], t: f64) -> Result<(), SimError> {
    if x.iter().all(|v| v.is_finite() && v.abs() <= DIVERGENCE_LIMIT) {
        Ok(())
    } else {
        Err(SimError::Diverged { time_s: t })
    }
}

/// One RK4 step of `ẋ = Ax + B·v` with `v = u + ΔP` held over the step.
pub fn rk4_step(ss: &StateSpace, x: &[f64], u_plus_dp: &[f64], dt: f64) -> Result<Vec<f64>, SimError> {
    if dt.is_nan() || dt <= 0.0 {
        return Err(SimError::Invalid(format!("dt must be > 0, got {dt}")));
    }
    let mut out = x.to_vec();
    Rk4::new(x.len()).step(ss, &mut out, u_plus_dp, dt);
    check_bounded(&out, dt)?;
    Ok(out)
}

/// Sample-and-hold PMU. At each frame instant (multiples of `1/pmu_rate`) it
/// latches the true signals plus fresh Gaussian errors; between frames it
/// returns the latched values. Disabled noise passes signals straight through.
pub struct Pmu {
    spec: NoiseSpec,
    rng: ChaCha8Rng,
    frame: Option<u64>,
    x_held: Vec<f64>,
    xdot_held: Vec<f64>,
}

fn gauss(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    sigma * z
}

impl Pmu {
    pub fn new(spec: NoiseSpec, n_states: usize) -> Self {
        Self {
            spec,
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
            frame: None,
            x_held: vec![0.0; n_states],
            xdot_held: vec![0.0; n_states],
        }
    }

    fn gauss(&mut self, sigma: f64) -> f64 {
        gauss(&mut self.rng, sigma)
    }

    pub fn measure(&mut self, x_true: &[f64], xdot_true: &[f64], t: f64) -> (&[f64], &[f64]) {
        if !self.spec.enabled {
            self.x_held.copy_from_slice(x_true);
            self.xdot_held.copy_from_slice(xdot_true);
            return (&self.x_held, &self.xdot_held);
        }
        let frame = (t * self.spec.pmu_rate_hz + 1e-9).floor() as u64;
        if self.frame != Some(frame) {
            self.frame = Some(frame);
            let n = x_true.len() / 2;
            let sigma_speed = self.spec.sigma_f_hz / self.spec.f_nom_hz;
            let sigma_accel = self.spec.sigma_rocof_hz_per_s / self.spec.f_nom_hz;
            for (held, x) in self.x_held[..n].iter_mut().zip(x_true) {
                *held = x + gauss(&mut self.rng, self.spec.sigma_delta_rad);
            }
            for i in 0..n {
                // One frequency reading serves as both Δω and Δδ̇.
                let e = self.gauss(sigma_speed);
                self.x_held[n + i] = x_true[n + i] + e;
                self.xdot_held[i] = xdot_true[i] + e;
            }
            for i in 0..n {
                self.xdot_held[n + i] = xdot_true[n + i] + self.gauss(sigma_accel);
            }
        }
        (&self.x_held, &self.xdot_held)
    }
}

enum Law {
    /// `u = −K x_meas`.
    State(Mat),
    /// `u = −Kn ẋ_meas + Kn B ΔP̂`.
    Derivative { kn: Mat, knb: Mat },
}

/// Runs `ẋ = Ax + B(u + ΔP)` under the scenario's controller from `x(0) = 0`.
pub fn simulate_closed_loop(ss: &StateSpace, gains: &GainSet, sc: &Scenario) -> Result<Trajectory, SimError> {
    let n = ss.n_inputs();
    let nx = ss.n_states();
    sc.validate(n)?;
    if gains.ks.rows() != n || gains.ks.cols() != nx {
        return Err(SimError::Invalid(format!(
            "gain is {}x{}, plant needs {n}x{nx}",
            gains.ks.rows(),
            gains.ks.cols()
        )));
    }
    let law = match sc.controller {
        ControllerMode::Fd | ControllerMode::Sf => Law::State(gains.ks.clone()),
        ControllerMode::SdfExact => {
            let sdf = gains.sdf.as_ref().ok_or(SimError::MissingSdfGains(sc.controller))?;
            let keff = control::effective_sdf_gain(ss, &sdf.kn).map_err(|e| match e {
                ControlError::SingularLoop => SimError::SingularLoop,
                other => other.into(),
            })?;
            Law::State(keff)
        }
        ControllerMode::SdfMeasured => {
            let sdf = gains.sdf.as_ref().ok_or(SimError::MissingSdfGains(sc.controller))?;
            Law::Derivative { kn: sdf.kn.clone(), knb: &sdf.kn * &ss.b }
        }
    };

    let steps = sc.n_steps();
    let mut traj = Trajectory::with_capacity(n, sc.dt_s, steps + 1);
    let mut pmu = Pmu::new(sc.noise, nx);
    let mut rk4 = Rk4::new(nx);
    let mut x = vec![0.0; nx];
    let mut xdot = vec![0.0; nx];
    let mut u = vec![0.0; n];
    let mut dp = vec![0.0; n];
    let mut dp_hat = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut bv = vec![0.0; nx];
    let needs_derivative = sc.noise.enabled || matches!(law, Law::Derivative { .. });

    for k in 0..=steps {
        let t = k as f64 * sc.dt_s;
        sc.disturbance.eval_into(t, &mut dp);
        if needs_derivative {
            // Physical derivative before the controller reacts at this instant.
            for i in 0..n {
                v[i] = u[i] + dp[i];
            }
            ss.a.mul_vec_into(&x, &mut xdot);
            ss.b.mul_vec_into(&v, &mut bv);
            xdot.iter_mut().zip(&bv).for_each(|(d, b)| *d += b);
        }
        let (x_meas, xdot_meas) = pmu.measure(&x, &xdot, t);
        match &law {
            Law::State(kmat) => {
                kmat.mul_vec_into(x_meas, &mut u);
                u.iter_mut().for_each(|ui| *ui = -*ui);
            }
            Law::Derivative { kn, knb } => {
                match sc.feedforward {
                    Feedforward::TrueValue => dp_hat.copy_from_slice(&dp),
                    Feedforward::Delayed { lag_s } => {
                        if t >= lag_s {
                            sc.disturbance.eval_into(t - lag_s, &mut dp_hat);
                        } else {
                            dp_hat.iter_mut().for_each(|d| *d = 0.0);
                        }
                    }
                    Feedforward::Off => dp_hat.iter_mut().for_each(|d| *d = 0.0),
                }
                kn.mul_vec_into(xdot_meas, &mut u);
                knb.mul_vec_into(&dp_hat, &mut scratch);
                for i in 0..n {
                    u[i] = scratch[i] - u[i];
                }
            }
        }
        traj.times.push(t);
        traj.states.extend_from_slice(&x);
        traj.controls.extend_from_slice(&u);
        traj.measured.extend_from_slice(x_meas);
        traj.measured.extend_from_slice(xdot_meas);
        traj.dp.extend_from_slice(&dp);
        if k == steps {
            break;
        }
        for i in 0..n {
            v[i] = u[i] + dp[i];
        }
        rk4.step(ss, &mut x, &v, sc.dt_s);
        check_bounded(&x, t + sc.dt_s)?;
    }
    Ok(traj)
}
