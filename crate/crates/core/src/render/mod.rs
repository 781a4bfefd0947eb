//! Single-viewport rendering: camera rig with latched swaps, the stalled
//! renderer under native pause, and degradation profiles.

pub mod condition;
pub mod raster;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use condition::{apply_condition, ConditionName, ConditionProfile};
pub use raster::PinholeCamera;

use crate::depth::{DepthConversionProfile, Frustum};
use crate::sim::{SimError, World};
use crate::Pose;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenderError {
    #[error("camera swap requested while the engine is natively paused")]
    SwapWhilePaused,
    #[error("engine paused before any frame was committed")]
    NoCommittedFrame,
    #[error("invalid camera rig: {0}")]
    InvalidRig(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn other(self) -> Self {
        match self {
            Self::Left => Self::Right,
            Self::Right => Self::Left,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Self::Left => 'L',
            Self::Right => 'R',
        }
    }
}

/// Camera parameters as written in scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RigSpec {
    pub baseline: f64,
    pub hfov_deg: f64,
    pub vfov_deg: f64,
    pub near: f64,
    pub far: f64,
    pub width: usize,
    pub height: usize,
    /// Rig center relative to the vehicle origin: `[forward, left, up]`.
    pub mount: [f64; 3],
}

impl Default for RigSpec {
    fn default() -> Self {
        Self {
            baseline: 0.54,
            hfov_deg: 90.0,
            vfov_deg: 59.0,
            near: 0.01,
            far: 600.0,
            width: 320,
            height: 180,
            mount: [1.2, 0.0, 1.5],
        }
    }
}

impl RigSpec {
    pub fn full_scale() -> Self {
        Self {
            width: 1920,
            height: 1080,
            ..Self::default()
        }
    }
}

/// Pixel intrinsics shared by both cameras of the rectified pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }
}

/// Parallel stereo rig on a single viewport: exactly one side renders at
/// a time and swaps take effect after the next unpaused render tick.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraRig {
    spec: RigSpec,
    mount: Pose,
    active: Side,
    pending: Option<Side>,
}

impl CameraRig {
    pub fn new(spec: RigSpec) -> Result<Self, RenderError> {
        if !(spec.baseline > 0.0) {
            return Err(RenderError::InvalidRig("baseline must be positive".into()));
        }
        if !(spec.near > 0.0 && spec.near < spec.far) {
            return Err(RenderError::InvalidRig(
                "clip planes need 0 < near < far".into(),
            ));
        }
        let frustum = Frustum {
            width: spec.width,
            height: spec.height,
            hfov_deg: spec.hfov_deg,
            vfov_deg: spec.vfov_deg,
            near: spec.near,
            far: spec.far,
        };
        frustum
            .validate()
            .map_err(|e| RenderError::InvalidRig(e.to_string()))?;
        // Camera axes (x right, y down, z forward) in the vehicle frame.
        let rotation = Matrix3::from_columns(&[
            Vector3::new(0.0, -1.0, 0.0),
            Vector3::new(0.0, 0.0, -1.0),
            Vector3::new(1.0, 0.0, 0.0),
        ]);
        let mount = Pose::new(rotation, Vector3::from(spec.mount));
        Ok(Self {
            spec,
            mount,
            active: Side::Left,
            pending: None,
        })
    }

    pub fn spec(&self) -> &RigSpec {
        &self.spec
    }

    pub fn baseline(&self) -> f64 {
        self.spec.baseline
    }

    pub fn active_side(&self) -> Side {
        self.active
    }

    pub fn pending_swap(&self) -> Option<Side> {
        self.pending
    }

    /// Side that will be active once any pending swap completes.
    pub fn target_side(&self) -> Side {
        self.pending.unwrap_or(self.active)
    }

    pub fn frustum(&self) -> Frustum<f64> {
        Frustum {
            width: self.spec.width,
            height: self.spec.height,
            hfov_deg: self.spec.hfov_deg,
            vfov_deg: self.spec.vfov_deg,
            near: self.spec.near,
            far: self.spec.far,
        }
    }

    pub fn intrinsics(&self) -> Intrinsics {
        let f = self.frustum();
        let (fx, fy) = f.focal();
        let (cx, cy) = f.principal_point();
        Intrinsics { fx, fy, cx, cy }
    }

    pub fn depth_profile(&self) -> DepthConversionProfile<f64> {
        DepthConversionProfile::sim_native(self.spec.near, self.spec.far)
            .expect("rig validated clip planes")
    }

    /// Camera offset from the rig center, in camera coordinates.
    pub fn side_offset(&self, side: Side) -> Pose {
        let half = self.spec.baseline * 0.5;
        let x = match side {
            Side::Left => -half,
            Side::Right => half,
        };
        Pose::from_translation(Vector3::new(x, 0.0, 0.0))
    }

    /// `vehicle ∘ mount ∘ side offset`.
    pub fn camera_pose(&self, vehicle: &Pose, side: Side) -> Pose {
        vehicle
            .compose(&self.mount)
            .compose(&self.side_offset(side))
    }

    pub fn camera(&self, vehicle: &Pose, side: Side) -> PinholeCamera {
        let k = self.intrinsics();
        PinholeCamera {
            pose: self.camera_pose(vehicle, side),
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
            near: self.spec.near,
            far: self.spec.far,
            width: self.spec.width,
            height: self.spec.height,
        }
    }

    /// Latches a swap to `side`. Rejected while natively paused, since the
    /// stalled renderer cannot service it. A request for the side that is
    /// already (or about to be) active costs nothing.
    pub fn request_camera_swap(&mut self, world: &World, side: Side) -> Result<(), RenderError> {
        if world.is_paused() {
            return Err(RenderError::SwapWhilePaused);
        }
        if side == self.active {
            self.pending = None;
        } else {
            self.pending = Some(side);
        }
        Ok(())
    }

    /// Completes a latched swap at the end of a render tick. Returns whether
    /// the active side changed.
    pub fn complete_render_tick(&mut self) -> bool {
        match self.pending.take() {
            Some(side) => {
                self.active = side;
                true
            }
            None => false,
        }
    }
}

/// One rendered view.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameBuffer {
    pub width: usize,
    pub height: usize,
    /// Interleaved 8-bit RGB, row-major.
    pub rgb: Vec<u8>,
    /// Depth buffer in NDC; `1` where nothing was drawn.
    pub ndc_depth: Vec<f64>,
    /// Object id per pixel (beacons carry [`crate::sim::scene::BEACON_FLAG`]).
    pub object_ids: Vec<u32>,
    pub uni_tick: u64,
    pub in_game_time: f64,
    pub camera_pose: Pose,
    pub side: Side,
    /// Set when the frame was served by a natively paused engine.
    pub stale: bool,
}

/// Rasterizes `world` from `side` of the rig. Pure in `(world, rig, side)`.
pub fn render_side(world: &World, rig: &CameraRig, side: Side) -> Result<FrameBuffer, RenderError> {
    let vehicle = world.vehicle_pose()?;
    let cam = rig.camera(&vehicle, side);
    let dynamic = world.dynamic_triangles();
    let scene = world.scene();
    let out = raster::rasterize(
        &cam,
        scene.statics.iter().chain(dynamic.iter()),
        &scene.beacons,
        &rig.depth_profile(),
    );
    Ok(FrameBuffer {
        width: rig.spec.width,
        height: rig.spec.height,
        rgb: out.rgb,
        ndc_depth: out.ndc,
        object_ids: out.ids,
        uni_tick: world.clock.uni_tick,
        in_game_time: world.clock.in_game_time,
        camera_pose: cam.pose,
        side,
        stale: false,
    })
}

#[derive(Debug, Clone)]
struct Committed {
    world: World,
    side: Side,
    frame: Option<FrameBuffer>,
}

/// The engine's presentation stage. Every unpaused tick commits the active
/// view; rasterization happens on first read of a committed view.
#[derive(Debug, Clone, Default)]
pub struct Renderer {
    committed: Option<Committed>,
}

impl Renderer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Render step of an engine tick: completes latched swaps and commits
    /// the active view. Does nothing while natively paused.
    pub fn tick(&mut self, world: &World, rig: &mut CameraRig) {
        if world.is_paused() {
            return;
        }
        rig.complete_render_tick();
        self.committed = Some(Committed {
            world: world.clone(),
            side: rig.active_side(),
            frame: None,
        });
    }

    /// The active view. While natively paused the engine does not render,
    /// so the last committed frame is returned with `stale = true`.
    pub fn render_view(
        &mut self,
        world: &World,
        rig: &CameraRig,
    ) -> Result<FrameBuffer, RenderError> {
        if !world.is_paused() {
            let frame = render_side(world, rig, rig.active_side())?;
            self.committed = Some(Committed {
                world: world.clone(),
                side: rig.active_side(),
                frame: Some(frame.clone()),
            });
            return Ok(frame);
        }
        let committed = self
            .committed
            .as_mut()
            .ok_or(RenderError::NoCommittedFrame)?;
        if committed.frame.is_none() {
            committed.frame = Some(render_side(&committed.world, rig, committed.side)?);
        }
        let mut frame = committed.frame.clone().expect("frame cached above");
        frame.stale = true;
        Ok(frame)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::scene::{Beacon, BEACON_FLAG};
    use crate::sim::{Path, PathSpec, Scene, SegmentSpec, DEFAULT_TICK};
    use std::sync::Arc;

    fn path() -> Path {
        Path::from_spec(&PathSpec {
            start: [0.0, 0.0, 0.0],
            segments: vec![SegmentSpec::Straight { length: 100.0 }],
        })
        .unwrap()
    }

    fn empty_world() -> World {
        World::new(Arc::new(Scene::empty(path())), 0.0, DEFAULT_TICK, 0.0, 0)
    }

    fn rig() -> CameraRig {
        CameraRig::new(RigSpec::default()).unwrap()
    }

    #[test]
    fn empty_scene_is_sky_and_far_plane() {
        let f = render_side(&empty_world(), &rig(), Side::Left).unwrap();
        assert!(f.ndc_depth.iter().all(|&d| d == 1.0));
        assert!(f.rgb.chunks(3).all(|c| c == raster::SKY));
    }

    fn beacon_world(position: Vector3<f64>) -> World {
        let mut scene = Scene::empty(path());
        scene.beacons.push(Beacon {
            id: 1,
            position,
            radius: 0.05,
            color: [255, 0, 0],
        });
        World::new(Arc::new(scene), 0.0, DEFAULT_TICK, 0.0, 0)
    }

    #[test]
    fn on_axis_beacon_at_ten_metres() {
        let rig = rig();
        let left = rig.camera_pose(&Pose::identity(), Side::Left);
        // Ten metres straight ahead of the left camera.
        let world = beacon_world(left.transform_point(&Vector3::new(0.0, 0.0, 10.0)));
        let f = render_side(&world, &rig, Side::Left).unwrap();
        let idx = 90 * 320 + 160;
        assert_eq!(f.object_ids[idx], BEACON_FLAG | 1);
        let map = crate::depth::MapUv::compute(&rig.frustum()).unwrap();
        let depth = crate::depth::convert_pixel(
            f.ndc_depth[idx],
            map.at(160.0, 90.0),
            &rig.depth_profile(),
            crate::depth::DepthSemantics::Ray,
        )
        .unwrap();
        assert!((depth - 10.0).abs() < 1e-9);
    }

    #[test]
    fn beacon_beyond_clip_range_not_drawn() {
        let rig = rig();
        let left = rig.camera_pose(&Pose::identity(), Side::Left);
        for z in [700.0, 0.005] {
            let world = beacon_world(left.transform_point(&Vector3::new(0.0, 0.0, z)));
            let f = render_side(&world, &rig, Side::Left).unwrap();
            assert!(f.object_ids.iter().all(|&id| id == 0));
        }
    }

    #[test]
    fn swap_completes_after_one_render_tick() {
        let mut world = empty_world();
        let mut rig = rig();
        let mut renderer = Renderer::new();
        world.set_time_scale(0.0).unwrap();
        rig.request_camera_swap(&world, Side::Right).unwrap();
        assert_eq!(rig.active_side(), Side::Left);
        world.advance_tick();
        renderer.tick(&world, &mut rig);
        assert_eq!(rig.active_side(), Side::Right);
    }

    #[test]
    fn swap_while_paused_rejected() {
        let mut world = empty_world();
        let mut rig = rig();
        world.native_pause();
        assert_eq!(
            rig.request_camera_swap(&world, Side::Right),
            Err(RenderError::SwapWhilePaused)
        );
    }

    #[test]
    fn swap_to_active_side_is_free() {
        let world = empty_world();
        let mut rig = rig();
        rig.request_camera_swap(&world, Side::Left).unwrap();
        assert_eq!(rig.pending_swap(), None);
        assert!(!rig.complete_render_tick());
    }

    #[test]
    fn paused_engine_serves_stale_frame_and_holds_swaps() {
        let mut world = empty_world();
        let mut rig = rig();
        let mut renderer = Renderer::new();
        assert_eq!(
            {
                world.native_pause();
                renderer.render_view(&world, &rig)
            },
            Err(RenderError::NoCommittedFrame)
        );
        world.native_resume();
        world.advance_tick();
        renderer.tick(&world, &mut rig);
        rig.request_camera_swap(&world, Side::Right).unwrap();
        world.native_pause();
        world.advance_tick();
        renderer.tick(&world, &mut rig);
        assert_eq!(rig.active_side(), Side::Left);
        let f = renderer.render_view(&world, &rig).unwrap();
        assert!(f.stale);
        assert_eq!(f.side, Side::Left);
        assert_eq!(f.uni_tick, 1);
    }

    #[test]
    fn rig_validation() {
        assert!(CameraRig::new(RigSpec {
            baseline: 0.0,
            ..RigSpec::default()
        })
        .is_err());
        assert!(CameraRig::new(RigSpec {
            near: 700.0,
            ..RigSpec::default()
        })
        .is_err());
    }

    #[test]
    fn default_intrinsics() {
        let k = rig().intrinsics();
        assert!((k.fx - 160.0).abs() < 1e-12);
        assert!((k.fy - 90.0 / 29.5f64.to_radians().tan()).abs() < 1e-12);
        assert_eq!((k.cx, k.cy), (160.0, 90.0));
    }
}
