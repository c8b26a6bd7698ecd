//! Trajectory and metrics CSV export.
//!
//! Values are written with Rust's shortest round-trip float formatting, so
//! parsing a cell gives back the exact `f64` that was simulated.

use std::fmt::Write as _;
use std::path::Path;

use crate::metrics::SignalMetrics;
use crate::sim::Trajectory;
use crate::Error;

/// Fingerprint written as `#` comment lines above the column header.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvHeader {
    pub config_sha256: String,
    pub seed: u64,
    pub dt_s: f64,
    pub controller: String,
    pub f_nom_hz: f64,
}

impl CsvHeader {
    fn write_to(&self, out: &mut String) {
        let _ = writeln!(out, "# config_sha256={}", self.config_sha256);
        let _ = writeln!(out, "# seed={}", self.seed);
        let _ = writeln!(out, "# dt_s={}", self.dt_s);
        let _ = writeln!(out, "# controller={}", self.controller);
        let _ = writeln!(out, "# f_nom_hz={}", self.f_nom_hz);
    }
}

pub fn trajectory_columns(n_areas: usize) -> Vec<String> {
    let mut cols = vec!["t_s".to_string()];
    for (prefix, unit) in [("delta", "rad"), ("f", "hz"), ("u", "pu"), ("dp", "pu")] {
        cols.extend((1..=n_areas).map(|i| format!("{prefix}_{i}_{unit}")));
    }
    cols
}

/// Renders every `decimation`-th sample, starting with the first.
/// Frequencies are reported in Hz (`f_nom · Δω`).
pub fn format_trajectory_csv(traj: &Trajectory, decimation: usize, header: &CsvHeader) -> String {
    assert!(decimation >= 1, "decimation must be >= 1");
    let n = traj.n_areas;
    let mut out = String::new();
    header.write_to(&mut out);
    out.push_str(&trajectory_columns(n).join(","));
    out.push('\n');
    for k in (0..traj.len()).step_by(decimation) {
        let x = traj.state(k);
        let _ = write!(out, "{}", traj.times[k]);
        for v in &x[..n] {
            let _ = write!(out, ",{v}");
        }
        for v in &x[n..] {
            let _ = write!(out, ",{}", header.f_nom_hz * v);
        }
        for v in traj.control(k).iter().chain(traj.disturbance(k)) {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn emit_csv(traj: &Trajectory, path: impl AsRef<Path>, decimation: usize, header: &CsvHeader) -> Result<(), Error> {
    let path = path.as_ref();
    std::fs::write(path, format_trajectory_csv(traj, decimation, header)).map_err(|e| Error::io(path, e))
}

/// `signal,peak_deviation,transient_time_s,settled` per signal.
pub fn format_metrics_csv(metrics: &[SignalMetrics], header: &CsvHeader) -> String {
    let mut out = String::new();
    header.write_to(&mut out);
    out.push_str("signal,peak_deviation,transient_time_s,settled\n");
    for m in metrics {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            m.signal.key(),
            m.peak_deviation,
            m.transient_time_s(),
            m.transient.is_settled()
        );
    }
    out
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<(), Error> {
    let path = path.as_ref();
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
