//! Small-signal multi-area power-system models with frequency-difference,
//! LQR state-feedback and state-derivative damping controllers.
//!
//! States are ordered `(Δδ₁..Δδ_N, Δω₁..Δω_N)` everywhere: in matrices,
//! gains and exported CSV columns.

pub mod checks;
pub mod control;
pub mod experiment;
pub mod io;
pub mod matkit;
pub mod metrics;
pub mod model;
pub mod sim;

pub use control::{ControlError, GainMode, GainSet, LqrWeights, SdfGains};
pub use experiment::{ControllerSpec, KdObjective};
pub use io::config::{load_config, parse_config, ConfigError, LoadedConfig};
pub use matkit::{Mat, MatError};
pub use metrics::{ComparisonTable, SignalId};
pub use model::{AreaParams, ModelError, PowerSystem, StateSpace, TieLine, TieNetwork};
pub use sim::{ControllerMode, DisturbanceProfile, NoiseSpec, Scenario, SimError, Trajectory};

/// Exit codes shared by the command-line front end.
pub mod exit {
    pub const OK: i32 = 0;
    pub const VALIDATION: i32 = 1;
    pub const NUMERICAL: i32 = 2;
    pub const IO: i32 = 3;
    pub const USAGE: i32 = 64;
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Metrics(#[from] metrics::MetricsError),
    #[error("design: {0}")]
    Design(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Self::Io { path: path.as_ref().display().to_string(), source }
    }

    /// Validation failures map to 1, numerical failures to 2, I/O to 3.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(ConfigError::Io { .. }) | Self::Io { .. } => exit::IO,
            Self::Config(_) | Self::Model(_) | Self::Design(_) => exit::VALIDATION,
            Self::Control(ControlError::Invalid(_)) | Self::Sim(SimError::Invalid(_)) => exit::VALIDATION,
            Self::Control(_) | Self::Sim(_) | Self::Metrics(_) => exit::NUMERICAL,
        }
    }
}
