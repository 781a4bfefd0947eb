//! Scenario files: path, scene, rig and capture settings in TOML.

use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capture::CycleSchedule;
use crate::depth::DepthSemantics;
use crate::render::RigSpec;
use crate::sim::{PathSpec, SceneSpec, DEFAULT_TICK};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaptureSettings {
    /// Residual in-game time between the left and right TeFS captures.
    pub engine_disparity_ms: f64,
    pub schedule: CycleSchedule,
    pub depth_semantics: DepthSemantics,
}

impl Default for CaptureSettings {
    fn default() -> Self {
        Self {
            engine_disparity_ms: 0.25,
            schedule: CycleSchedule::default(),
            depth_semantics: DepthSemantics::Ray,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub speed_kmh: f64,
    #[serde(default = "default_tick")]
    pub tick_duration: f64,
    /// Number of capture cycles; when absent, cycles run until the ego
    /// reaches the end of the path.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cycles: Option<usize>,
    #[serde(default = "default_leak")]
    pub leak_fraction: f64,
    pub path: PathSpec,
    #[serde(default)]
    pub scene: SceneSpec,
    #[serde(default)]
    pub rig: RigSpec,
    #[serde(default)]
    pub capture: CaptureSettings,
}

fn default_tick() -> f64 {
    DEFAULT_TICK
}

fn default_leak() -> f64 {
    1.0
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<FsPath>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn speed(&self) -> f64 {
        self.speed_kmh / 3.6
    }

    pub fn engine_disparity(&self) -> f64 {
        self.capture.engine_disparity_ms * 1e-3
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: &str| Err(ScenarioError::Invalid(m.to_string()));
        if !(self.speed_kmh >= 0.0) || !self.speed_kmh.is_finite() {
            return bad("speed_kmh must be finite and non-negative");
        }
        if !(self.tick_duration > 0.0) || !self.tick_duration.is_finite() {
            return bad("tick_duration must be positive");
        }
        if !(self.leak_fraction >= 0.0) {
            return bad("leak_fraction must be non-negative");
        }
        if !(self.capture.engine_disparity_ms >= 0.0) {
            return bad("engine_disparity_ms must be non-negative");
        }
        if self.speed_kmh == 0.0 && self.cycles.is_none() {
            return bad("a stationary scenario needs an explicit cycle count");
        }
        self.capture
            .schedule
            .validate()
            .map_err(ScenarioError::Invalid)?;
        Ok(())
    }
}
