//! Stereo capture on a single-viewport engine: the temporal-controlled
//! frame swap cycle, the naive two-frame swap, the dual-viewport reference,
//! and whole-session orchestration.

mod cycle;
mod session;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cycle::{run_dual_viewport_cycle, run_naive_swap_cycle, run_tefs_cycle, TefsCycle};
pub use session::{
    build_world, observe_beacons, run_session, SampleSink, SessionInfo, SessionSummary,
};

use crate::depth::{ndc_to_depth, DepthError, DepthSemantics};
use crate::render::{CameraRig, FrameBuffer, RenderError, Renderer};
use crate::scalar::Real;
use crate::sim::{SimError, World};
use crate::vo::FeatureObservation;
use crate::{DepthProfile, DepthRaster, MapUv, Pose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaptureMethod {
    Tefs,
    NaiveSwap,
    DualViewport,
}

impl CaptureMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Tefs => "tefs",
            Self::NaiveSwap => "naive-swap",
            Self::DualViewport => "dual-viewport",
        }
    }
}

impl std::str::FromStr for CaptureMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tefs" => Ok(Self::Tefs),
            "naive" | "naive-swap" => Ok(Self::NaiveSwap),
            "dual" | "dual-viewport" => Ok(Self::DualViewport),
            other => Err(format!("unknown capture method `{other}`")),
        }
    }
}

/// Tick offsets of one capture cycle relative to its start tick `T`.
///
/// Ticks `T+1..=T+preset` run at time scale 1, after which the time scale
/// drops to 0. The left view is read after tick `T+left`, the right after
/// `T+right`, and the cycle ends after `T+length`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CycleSchedule {
    pub preset: u32,
    pub left: u32,
    pub right: u32,
    pub length: u32,
}

impl CycleSchedule {
    pub const fn standard() -> Self {
        Self {
            preset: 7,
            left: 8,
            right: 10,
            length: 10,
        }
    }

    pub const fn long() -> Self {
        Self {
            preset: 9,
            left: 10,
            right: 12,
            length: 12,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.preset < self.left && self.left < self.right && self.right <= self.length {
            Ok(())
        } else {
            Err(format!(
                "cycle schedule needs preset < left < right <= length, got {}/{}/{}/{}",
                self.preset, self.left, self.right, self.length
            ))
        }
    }

    /// Ticks spent at time scale 0 between the left and right reads.
    pub fn swap_ticks(&self) -> u32 {
        self.right - self.left
    }

    /// In-game seconds one cycle consumes.
    pub fn cycle_game_time(&self, method: CaptureMethod, tick: f64, residual: f64) -> f64 {
        match method {
            CaptureMethod::NaiveSwap => self.length as f64 * tick,
            _ => {
                (self.preset + self.length - self.right) as f64 * tick
                    + (self.right - self.preset) as f64 * residual
            }
        }
    }
}

impl Default for CycleSchedule {
    fn default() -> Self {
        Self::standard()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CyclePhase {
    Driving,
    PresetPseudoPause,
    PausedLeftCapture,
    SwapWait,
    PausedRightCapture,
    Restore,
}

impl std::fmt::Display for CyclePhase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::Driving => "driving",
            Self::PresetPseudoPause => "preset-pseudo-pause",
            Self::PausedLeftCapture => "paused-left-capture",
            Self::SwapWait => "swap-wait",
            Self::PausedRightCapture => "paused-right-capture",
            Self::Restore => "restore",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum CaptureError {
    #[error("protocol violation in phase {phase}: {detail}")]
    Protocol { phase: CyclePhase, detail: String },
    #[error("step for phase {expected} called during phase {actual}")]
    PhaseOrder {
        expected: CyclePhase,
        actual: CyclePhase,
    },
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Depth(#[from] DepthError),
    #[error("invalid capture configuration: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("dataset: {0}")]
    Sink(String),
}

/// Distance the ego travels between the two captures of a pair.
pub fn spatial_offset<T: Real>(speed: T, temporal_disparity: T) -> T {
    speed * temporal_disparity
}

/// The simulated engine a capture session drives.
#[derive(Debug, Clone)]
pub struct Engine {
    pub world: World,
    pub rig: CameraRig,
    pub renderer: Renderer,
    map: MapUv,
    profile: DepthProfile,
    semantics: DepthSemantics,
}

impl Engine {
    pub fn new(
        world: World,
        rig: CameraRig,
        semantics: DepthSemantics,
    ) -> Result<Self, CaptureError> {
        let map = MapUv::compute(&rig.frustum())?;
        let profile = rig.depth_profile();
        Ok(Self {
            world,
            rig,
            renderer: Renderer::new(),
            map,
            profile,
            semantics,
        })
    }

    /// One engine step followed by its render step.
    pub fn tick(&mut self) {
        self.world.advance_tick();
        self.renderer.tick(&self.world, &mut self.rig);
    }

    pub fn map_uv(&self) -> &MapUv {
        &self.map
    }

    pub fn depth_semantics(&self) -> DepthSemantics {
        self.semantics
    }

    /// Metric depth read back from a frame's depth buffer.
    pub fn read_depth(&self, frame: &FrameBuffer) -> Result<DepthRaster, CaptureError> {
        Ok(ndc_to_depth(&frame.ndc_depth, &self.map, &self.profile, self.semantics)?.depth)
    }

    fn assemble(
        &self,
        method: CaptureMethod,
        left: FrameBuffer,
        right: FrameBuffer,
    ) -> Result<StereoSample, CaptureError> {
        let vehicle_pose = self.world.vehicle_pose_at(left.in_game_time)?;
        let features = observe_beacons(self.world.scene(), &self.rig, &left, &right);
        Ok(StereoSample {
            left_depth: self.read_depth(&left)?,
            right_depth: self.read_depth(&right)?,
            gps: [vehicle_pose.translation.x, vehicle_pose.translation.y],
            in_game_time: left.in_game_time,
            vehicle_pose,
            method,
            features,
            left,
            right,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StereoSample {
    pub left: FrameBuffer,
    pub right: FrameBuffer,
    pub left_depth: DepthRaster,
    pub right_depth: DepthRaster,
    pub vehicle_pose: Pose,
    /// Flat-earth position, world metres.
    pub gps: [f64; 2],
    pub in_game_time: f64,
    pub method: CaptureMethod,
    /// Beacons visible in both views.
    pub features: Vec<FeatureObservation<f64>>,
}

impl StereoSample {
    /// Ground-truth pose recorded for the pair (the left camera).
    pub fn camera_pose(&self) -> &Pose {
        &self.left.camera_pose
    }

    pub fn temporal_disparity(&self) -> f64 {
        self.right.in_game_time - self.left.in_game_time
    }

    /// Copy with every raster emptied; poses, times and features stay.
    pub fn without_pixels(&self) -> StereoSample {
        let frame = |f: &FrameBuffer| FrameBuffer {
            rgb: Vec::new(),
            ndc_depth: Vec::new(),
            object_ids: Vec::new(),
            ..*f
        };
        let depth = |d: &DepthRaster| DepthRaster {
            data: Vec::new(),
            ..*d
        };
        StereoSample {
            left: frame(&self.left),
            right: frame(&self.right),
            left_depth: depth(&self.left_depth),
            right_depth: depth(&self.right_depth),
            features: self.features.clone(),
            ..*self
        }
    }
}
