//! Peak deviation, transient (settling) time and cross-controller comparison.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::sim::Trajectory;

pub const DEFAULT_BAND: f64 = 0.02;
/// Absolute settling floor for angle signals (rad).
pub const ANGLE_FLOOR_RAD: f64 = 1e-4;
/// Absolute settling floor for frequency signals (Hz).
pub const FREQ_FLOOR_HZ: f64 = 1e-4;
/// Trailing fraction of the horizon averaged for the final value.
pub const FINAL_WINDOW: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("empty time series")]
    EmptySeries,
    #[error("time grids differ ({0})")]
    GridMismatch(String),
    #[error("signal {0} needs area indices below {1}")]
    BadSignal(SignalId, usize),
}

/// Signals reported in the comparison table (areas are 0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SignalId {
    /// Δδ_i in rad.
    Angle(usize),
    /// Δf_i in Hz.
    Freq(usize),
    /// Δf_j − Δf_i in Hz.
    FreqDiff { to: usize, from: usize },
}

impl SignalId {
    /// Δδ₁, Δδ₂, Δf₁, Δf₂, Δf₂₁.
    pub fn two_area_rows() -> Vec<SignalId> {
        vec![
            SignalId::Angle(0),
            SignalId::Angle(1),
            SignalId::Freq(0),
            SignalId::Freq(1),
            SignalId::FreqDiff { to: 1, from: 0 },
        ]
    }

    /// Every angle, every frequency, then all pairwise differences `Δf_ji`, `j > i`.
    pub fn all_for(n_areas: usize) -> Vec<SignalId> {
        let mut out: Vec<SignalId> = (0..n_areas).map(SignalId::Angle).collect();
        out.extend((0..n_areas).map(SignalId::Freq));
        for from in 0..n_areas {
            for to in from + 1..n_areas {
                out.push(SignalId::FreqDiff { to, from });
            }
        }
        out
    }

    pub fn floor(self) -> f64 {
        match self {
            SignalId::Angle(_) => ANGLE_FLOOR_RAD,
            _ => FREQ_FLOOR_HZ,
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            SignalId::Angle(_) => "rad",
            _ => "Hz",
        }
    }

    /// Machine-friendly key, e.g. `delta_1`, `f_2`, `f_21`.
    pub fn key(self) -> String {
        match self {
            SignalId::Angle(i) => format!("delta_{}", i + 1),
            SignalId::Freq(i) => format!("f_{}", i + 1),
            SignalId::FreqDiff { to, from } => format!("f_{}{}", to + 1, from + 1),
        }
    }

    fn max_area(self) -> usize {
        match self {
            SignalId::Angle(i) | SignalId::Freq(i) => i,
            SignalId::FreqDiff { to, from } => to.max(from),
        }
    }

    /// Samples the signal from stored states; frequencies are `f_nom·Δω`.
    pub fn extract(self, traj: &Trajectory, f_nom_hz: f64) -> Result<Vec<f64>, MetricsError> {
        let n = traj.n_areas;
        if self.max_area() >= n {
            return Err(MetricsError::BadSignal(self, n));
        }
        Ok(match self {
            SignalId::Angle(i) => traj.state_series(i),
            SignalId::Freq(i) => traj.state_series(n + i).into_iter().map(|w| f_nom_hz * w).collect(),
            SignalId::FreqDiff { to, from } => traj
                .state_series(n + to)
                .into_iter()
                .zip(traj.state_series(n + from))
                .map(|(a, b)| f_nom_hz * (a - b))
                .collect(),
        })
    }
}

impl fmt::Display for SignalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SignalId::Angle(i) => write!(f, "Δδ{} (rad)", i + 1),
            SignalId::Freq(i) => write!(f, "Δf{} (Hz)", i + 1),
            SignalId::FreqDiff { to, from } => write!(f, "Δf{}{} (Hz)", to + 1, from + 1),
        }
    }
}

impl Serialize for SignalId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.key())
    }
}

/// Outcome of the settling search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Settling {
    /// Instant on the simulation clock after which the signal stays in band.
    Settled(f64),
    /// Still outside the band at the last sample.
    NotSettled { horizon_s: f64 },
}

impl Settling {
    pub fn time_s(self) -> f64 {
        match self {
            Settling::Settled(t) => t,
            Settling::NotSettled { horizon_s } => horizon_s,
        }
    }

    pub fn is_settled(self) -> bool {
        matches!(self, Settling::Settled(_))
    }
}

impl fmt::Display for Settling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Settling::Settled(t) => write!(f, "{t:.2}"),
            Settling::NotSettled { horizon_s } => write!(f, ">{horizon_s:.2}"),
        }
    }
}

/// max |v(t)| over `t ≥ t_from`.
pub fn peak_deviation(times: &[f64], values: &[f64], t_from: f64) -> f64 {
    times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= t_from)
        .fold(0.0, |m, (_, v)| m.max(v.abs()))
}

/// Mean of the trailing 5% of the samples.
pub fn final_value(values: &[f64]) -> Result<f64, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::EmptySeries);
    }
    let w = ((values.len() as f64 * FINAL_WINDOW).ceil() as usize).clamp(1, values.len());
    Ok(values[values.len() - w..].iter().sum::<f64>() / w as f64)
}

/// Smallest sampled `t*` such that `|v(t) − final| ≤ max(band·peak, floor)`
/// for all `t ≥ t*`, where `peak` is measured from `onset`.
pub fn transient_time(
    times: &[f64],
    values: &[f64],
    onset: f64,
    band: f64,
    floor: f64,
) -> Result<Settling, MetricsError> {
    if values.is_empty() || times.len() != values.len() {
        return Err(MetricsError::EmptySeries);
    }
    assert!(band > 0.0 && band < 1.0, "band must lie in (0, 1)");
    let fin = final_value(values)?;
    let threshold = (band * peak_deviation(times, values, onset)).max(floor);
    match values.iter().rposition(|v| (v - fin).abs() > threshold) {
        None => Ok(Settling::Settled(times[0])),
        Some(last) if last + 1 == values.len() => {
            Ok(Settling::NotSettled { horizon_s: times[last] })
        }
        Some(last) => Ok(Settling::Settled(times[last + 1])),
    }
}

/// Relative transient-time reduction of `test` against `base`, in percent.
/// NaN when the baseline never left its band (`t_base <= 0`).
pub fn improvement_pct(t_base: f64, t_test: f64) -> f64 {
    if t_base <= 0.0 {
        return f64::NAN;
    }
    (t_base - t_test) / t_base * 100.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Distance {
    pub states: f64,
    pub controls: f64,
}

/// Max-over-time ∞-norm of state and control differences.
pub fn trajectory_distance(a: &Trajectory, b: &Trajectory) -> Result<Distance, MetricsError> {
    if a.times != b.times || a.n_areas != b.n_areas {
        return Err(MetricsError::GridMismatch(format!(
            "{} samples / {} areas vs {} samples / {} areas",
            a.len(),
            a.n_areas,
            b.len(),
            b.n_areas
        )));
    }
    let gap = |x: &[f64], y: &[f64]| x.iter().zip(y).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
    Ok(Distance { states: gap(&a.states, &b.states), controls: gap(&a.controls, &b.controls) })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalMetrics {
    pub signal: SignalId,
    pub peak_deviation: f64,
    pub transient: Settling,
}

impl SignalMetrics {
    pub fn transient_time_s(&self) -> f64 {
        self.transient.time_s()
    }
}

/// Metrics for one signal of a trajectory with the default band and floors.
pub fn signal_metrics(
    traj: &Trajectory,
    signal: SignalId,
    f_nom_hz: f64,
    onset: f64,
) -> Result<SignalMetrics, MetricsError> {
    let v = signal.extract(traj, f_nom_hz)?;
    Ok(SignalMetrics {
        signal,
        peak_deviation: peak_deviation(&traj.times, &v, onset),
        transient: transient_time(&traj.times, &v, onset, DEFAULT_BAND, signal.floor())?,
    })
}

pub fn trajectory_metrics(
    traj: &Trajectory,
    signals: &[SignalId],
    f_nom_hz: f64,
    onset: f64,
) -> Result<Vec<SignalMetrics>, MetricsError> {
    signals.iter().map(|s| signal_metrics(traj, *s, f_nom_hz, onset)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub signal: SignalId,
    pub base: SignalMetrics,
    pub test: SignalMetrics,
    pub improvement_pct: f64,
}

/// Per-signal comparison of a test controller against a baseline (FD).
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub base_label: String,
    pub test_label: String,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn new(base_label: &str, test_label: &str, base: &[SignalMetrics], test: &[SignalMetrics]) -> Self {
        let rows = base
            .iter()
            .zip(test)
            .map(|(b, t)| {
                debug_assert_eq!(b.signal, t.signal);
                ComparisonRow {
                    signal: b.signal,
                    base: *b,
                    test: *t,
                    improvement_pct: improvement_pct(b.transient_time_s(), t.transient_time_s()),
                }
            })
            .collect();
        Self { base_label: base_label.to_string(), test_label: test_label.to_string(), rows }
    }

    pub fn from_trajectories(
        base_label: &str,
        base: &Trajectory,
        test_label: &str,
        test: &Trajectory,
        signals: &[SignalId],
        f_nom_hz: f64,
        onset: f64,
    ) -> Result<Self, MetricsError> {
        let b = trajectory_metrics(base, signals, f_nom_hz, onset)?;
        let t = trajectory_metrics(test, signals, f_nom_hz, onset)?;
        Ok(Self::new(base_label, test_label, &b, &t))
    }

    pub fn row(&self, signal: SignalId) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.signal == signal)
    }
}
