//! JSON configuration documents (`"schema": "oscidamp-config/1"`).
//!
//! Area and tie indices in documents are 1-based; everything past
//! [`parse_config`] is 0-based.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::control::{default_weight_diagonals, LqrWeights};
use crate::experiment::{ControllerSpec, KdObjective};
use crate::model::{AreaParams, ModelError, PowerSystem, TieLine, TieNetwork, DEFAULT_F_NOM_HZ};
use crate::sim::{
    ControllerMode, DisturbanceProfile, Feedforward, NoiseSpec, Scenario, DEFAULT_DT_S, DEFAULT_PMU_RATE_HZ,
    DEFAULT_SIGMA_DELTA_RAD, DEFAULT_SIGMA_F_HZ,
};

pub const SCHEMA_VERSION: &str = "oscidamp-config/1";
pub const DEFAULT_DECIMATION: usize = 10;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid config at `{path}`: {message}")]
    Validation { path: String, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Validation { path: path.into(), message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDoc {
    pub schema: String,
    pub system: SystemDoc,
    #[serde(default)]
    pub controller: ControllerDoc,
    pub scenario: ScenarioDoc,
    #[serde(default)]
    pub output: OutputDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDoc {
    #[serde(default = "default_f_nom")]
    pub f_nom_hz: f64,
    pub areas: Vec<AreaDoc>,
    pub ties: Vec<TieDoc>,
    pub stiffness_eps: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreaDoc {
    pub inertia_s: f64,
    pub damping_pu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TieDoc {
    pub i: usize,
    pub j: usize,
    pub t_pu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerDoc {
    #[serde(default = "default_mode")]
    pub mode: ControllerMode,
    #[serde(default)]
    pub kd: Option<f64>,
    #[serde(default)]
    pub kd_objective: KdObjective,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lqr: Option<LqrDoc>,
}

impl Default for ControllerDoc {
    fn default() -> Self {
        Self { mode: default_mode(), kd: None, kd_objective: KdObjective::default(), lqr: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LqrDoc {
    pub q_diag: Vec<f64>,
    pub r_diag: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub disturbance: DisturbanceDoc,
    #[serde(default)]
    pub noise: NoiseDoc,
    pub horizon_s: f64,
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    #[serde(default)]
    pub feedforward: FeedforwardDoc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DisturbanceDoc {
    None,
    StepLoad { area: usize, magnitude_pu: f64, t_on_s: f64, t_off_s: f64 },
    FaultPulse { area: usize, magnitude_pu: f64, t_on_s: f64, duration_s: f64 },
    BurstLoad { area: usize, low_pu: f64, high_pu: f64, period_s: f64, duty: f64, t_start_s: f64, t_end_s: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseDoc {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_sigma_f")]
    pub sigma_f_hz: f64,
    #[serde(default = "default_sigma_delta")]
    pub sigma_delta_rad: f64,
    /// Derived from `sigma_f_hz` and the PMU rate when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_rocof_hz_per_s: Option<f64>,
    #[serde(default = "default_pmu_rate")]
    pub pmu_rate_hz: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl Default for NoiseDoc {
    fn default() -> Self {
        Self {
            enabled: false,
            sigma_f_hz: DEFAULT_SIGMA_F_HZ,
            sigma_delta_rad: DEFAULT_SIGMA_DELTA_RAD,
            sigma_rocof_hz_per_s: None,
            pmu_rate_hz: DEFAULT_PMU_RATE_HZ,
            seed: default_seed(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FeedforwardDoc {
    #[default]
    TrueValue,
    Delayed {
        lag_s: f64,
    },
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputDoc {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_decimation")]
    pub decimation: usize,
}

impl Default for OutputDoc {
    fn default() -> Self {
        Self { dir: default_out_dir(), decimation: DEFAULT_DECIMATION }
    }
}

fn default_f_nom() -> f64 {
    DEFAULT_F_NOM_HZ
}
fn default_mode() -> ControllerMode {
    ControllerMode::SdfExact
}
fn default_dt() -> f64 {
    DEFAULT_DT_S
}
fn default_sigma_f() -> f64 {
    DEFAULT_SIGMA_F_HZ
}
fn default_sigma_delta() -> f64 {
    DEFAULT_SIGMA_DELTA_RAD
}
fn default_pmu_rate() -> f64 {
    DEFAULT_PMU_RATE_HZ
}
fn default_seed() -> u64 {
    1
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_decimation() -> usize {
    DEFAULT_DECIMATION
}

/// Fully validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub doc: ConfigDoc,
    pub system: PowerSystem,
    pub controller: ControllerSpec,
    pub scenario: Scenario,
    pub output: OutputDoc,
}

impl LoadedConfig {
    /// SHA-256 of the canonical JSON form of the document.
    pub fn fingerprint(&self) -> String {
        fingerprint(&self.doc)
    }

    pub fn seed(&self) -> u64 {
        self.scenario.noise.seed
    }

    /// Same configuration with the noise seed replaced.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        out.doc.scenario.noise.seed = seed;
        out.scenario.noise.seed = seed;
        out
    }

    pub fn to_json(&self) -> String {
        to_json(&self.doc)
    }
}

pub fn fingerprint(doc: &ConfigDoc) -> String {
    let canonical = serde_json::to_string(doc).expect("config documents always serialize");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

pub fn to_json(doc: &ConfigDoc) -> String {
    serde_json::to_string_pretty(doc).expect("config documents always serialize")
}

pub fn load_config(path: impl AsRef<Path>) -> Result<LoadedConfig, ConfigError> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<LoadedConfig, ConfigError> {
    let doc = parse_doc(text)?;
    build(doc)
}

pub fn parse_doc(text: &str) -> Result<ConfigDoc, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: ConfigDoc = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        match inner.classify() {
            serde_json::error::Category::Data => {
                invalid(path, format!("{inner}"))
            }
            _ => ConfigError::Parse { line: inner.line(), column: inner.column(), message: inner.to_string() },
        }
    })?;
    Ok(doc)
}

fn map_model(section: &str, e: ModelError) -> ConfigError {
    match e {
        ModelError::Invalid { field, message } => {
            let field = if field == "n_areas" { "areas".to_string() } else { field };
            invalid(format!("{section}.{field}"), message)
        }
        ModelError::Disconnected(area) => {
            invalid(format!("{section}.ties"), format!("tie-line graph is disconnected: area {area} is unreachable"))
        }
        other => invalid(section, other.to_string()),
    }
}

fn positive(path: String, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(invalid(path, format!("must be finite and > 0, got {v}")))
    }
}

fn area_index(path: &str, idx: usize, n: usize) -> Result<usize, ConfigError> {
    if idx == 0 || idx > n {
        return Err(invalid(path, format!("area index must lie in 1..={n}, got {idx}")));
    }
    Ok(idx - 1)
}

/// Validates a parsed document and builds the object graph.
pub fn build(doc: ConfigDoc) -> Result<LoadedConfig, ConfigError> {
    if doc.schema != SCHEMA_VERSION {
        return Err(invalid("schema", format!("expected \"{SCHEMA_VERSION}\", got \"{}\"", doc.schema)));
    }
    let system = build_system(&doc.system)?;
    let n = system.n_areas();
    let controller = build_controller(&doc.controller, n)?;
    let scenario = build_scenario(&doc.scenario, &controller, system.f_nom_hz(), n)?;
    if doc.output.decimation == 0 {
        return Err(invalid("output.decimation", "must be >= 1"));
    }
    let output = doc.output.clone();
    Ok(LoadedConfig { doc, system, controller, scenario, output })
}

fn build_system(s: &SystemDoc) -> Result<PowerSystem, ConfigError> {
    positive("system.f_nom_hz".into(), s.f_nom_hz)?;
    if s.areas.is_empty() {
        return Err(invalid("system.areas", "at least one area is required"));
    }
    let n = s.areas.len();
    let mut areas = Vec::with_capacity(n);
    for (k, a) in s.areas.iter().enumerate() {
        areas.push(AreaParams::new(a.inertia_s, a.damping_pu).map_err(|e| map_model(&format!("system.areas[{k}]"), e))?);
    }
    let mut ties = Vec::with_capacity(s.ties.len());
    for (k, t) in s.ties.iter().enumerate() {
        let i = area_index(&format!("system.ties[{k}].i"), t.i, n)?;
        let j = area_index(&format!("system.ties[{k}].j"), t.j, n)?;
        ties.push(TieLine { i, j, coeff: t.t_pu });
    }
    let net = TieNetwork::new(n, ties, s.stiffness_eps.clone()).map_err(|e| map_model("system", e))?;
    PowerSystem::new(areas, net, s.f_nom_hz).map_err(|e| map_model("system", e))
}

fn build_controller(c: &ControllerDoc, n: usize) -> Result<ControllerSpec, ConfigError> {
    if let Some(kd) = c.kd {
        positive("controller.kd".into(), kd)?;
    }
    let weights = match &c.lqr {
        None => LqrWeights::default_for(n),
        Some(l) => {
            if l.q_diag.len() != 2 * n {
                return Err(invalid(
                    "controller.lqr.q_diag",
                    format!("expected {} entries, got {}", 2 * n, l.q_diag.len()),
                ));
            }
            if l.r_diag.len() != n {
                return Err(invalid("controller.lqr.r_diag", format!("expected {n} entries, got {}", l.r_diag.len())));
            }
            LqrWeights::from_diagonals(&l.q_diag, &l.r_diag).map_err(|e| invalid("controller.lqr", e.to_string()))?
        }
    };
    Ok(ControllerSpec { mode: c.mode, kd: c.kd, kd_objective: c.kd_objective, weights })
}

fn build_scenario(s: &ScenarioDoc, c: &ControllerSpec, f_nom_hz: f64, n: usize) -> Result<Scenario, ConfigError> {
    const AREA: &str = "scenario.disturbance.area";
    let disturbance = match s.disturbance {
        DisturbanceDoc::None => DisturbanceProfile::None,
        DisturbanceDoc::StepLoad { area, magnitude_pu, t_on_s, t_off_s } => {
            DisturbanceProfile::StepLoad { area: area_index(AREA, area, n)?, magnitude_pu, t_on_s, t_off_s }
        }
        DisturbanceDoc::FaultPulse { area, magnitude_pu, t_on_s, duration_s } => {
            DisturbanceProfile::FaultPulse { area: area_index(AREA, area, n)?, magnitude_pu, t_on_s, duration_s }
        }
        DisturbanceDoc::BurstLoad { area, low_pu, high_pu, period_s, duty, t_start_s, t_end_s } => {
            DisturbanceProfile::BurstLoad {
                area: area_index(AREA, area, n)?,
                low_pu,
                high_pu,
                period_s,
                duty,
                t_start_s,
                t_end_s,
            }
        }
    };
    disturbance.validate(n).map_err(|e| invalid("scenario.disturbance", e.to_string()))?;
    let nd = &s.noise;
    let noise = NoiseSpec {
        enabled: nd.enabled,
        sigma_f_hz: nd.sigma_f_hz,
        sigma_delta_rad: nd.sigma_delta_rad,
        sigma_rocof_hz_per_s: nd
            .sigma_rocof_hz_per_s
            .unwrap_or_else(|| NoiseSpec::derived_sigma_rocof(nd.sigma_f_hz, nd.pmu_rate_hz)),
        pmu_rate_hz: nd.pmu_rate_hz,
        seed: nd.seed,
        f_nom_hz,
    };
    noise.validate().map_err(|e| invalid("scenario.noise", e.to_string()))?;
    positive("scenario.horizon_s".into(), s.horizon_s)?;
    positive("scenario.dt_s".into(), s.dt_s)?;
    let feedforward = match s.feedforward {
        FeedforwardDoc::TrueValue => Feedforward::TrueValue,
        FeedforwardDoc::Delayed { lag_s } => Feedforward::Delayed { lag_s },
        FeedforwardDoc::Off => Feedforward::Off,
    };
    let scenario = Scenario { disturbance, noise, horizon_s: s.horizon_s, dt_s: s.dt_s, controller: c.mode, feedforward };
    scenario.validate(n).map_err(|e| invalid("scenario", e.to_string()))?;
    Ok(scenario)
}

/// Default weights written out as explicit diagonals.
pub fn default_lqr_doc(n_areas: usize) -> LqrDoc {
    let (q_diag, r_diag) = default_weight_diagonals(n_areas);
    LqrDoc { q_diag, r_diag }
}
