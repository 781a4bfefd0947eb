//! Deterministic single-viewport engine: fixed-step ticks, time scaling,
//! native pause and pseudo-pause, scripted ego motion.

pub mod path;
pub mod scene;

use std::sync::Arc;

use nalgebra::Vector3;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use path::{Path, PathPoint, PathSpec, SegmentSpec};
pub use scene::{AnimatedProp, Beacon, MotionKind, Scene, SceneSpec, TrafficBox, Triangle};

use crate::Pose;

/// Engine step at the default 60 Hz update rate.
pub const DEFAULT_TICK: f64 = 1.0 / 60.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("time scale must be non-negative and finite, got {0}")]
    InvalidTimeScale(f64),
    #[error("{value} outside the scenario range [0, {limit}]")]
    OutOfRange { value: f64, limit: f64 },
    #[error("invalid path: {0}")]
    InvalidPath(String),
}

/// Engine time keeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineClock {
    /// Engine steps since start; counts paused ticks too.
    pub uni_tick: u64,
    /// Simulated world seconds.
    pub in_game_time: f64,
    pub time_scale: f64,
    pub native_paused: bool,
    /// Real seconds per tick at time scale 1.
    pub tick_duration: f64,
    /// In-game seconds that still elapse per tick while the time scale is
    /// zero. Models the engine's residual temporal disparity under
    /// pseudo-pause; zero gives a perfect freeze.
    pub freeze_residual: f64,
}

impl EngineClock {
    pub fn new(tick_duration: f64) -> Self {
        Self {
            uni_tick: 0,
            in_game_time: 0.0,
            time_scale: 1.0,
            native_paused: false,
            tick_duration,
            freeze_residual: 0.0,
        }
    }

    /// In-game seconds the next tick will add.
    pub fn step(&self) -> f64 {
        if self.native_paused {
            0.0
        } else if self.time_scale == 0.0 {
            self.freeze_residual
        } else {
            self.time_scale * self.tick_duration
        }
    }

    pub fn is_pseudo_paused(&self) -> bool {
        !self.native_paused && self.time_scale == 0.0
    }
}

/// Full engine state. Static scene data is shared; cloning a world is cheap.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    scene: Arc<Scene>,
    pub clock: EngineClock,
    /// Ego speed along the path, m/s.
    speed: f64,
    /// Phase of each hard-coded prop, radians.
    phases: Vec<f64>,
    /// Fraction of the nominal per-tick step hard-coded props take.
    leak_fraction: f64,
    seed: u64,
}

impl World {
    pub fn new(
        scene: Arc<Scene>,
        speed: f64,
        tick_duration: f64,
        leak_fraction: f64,
        seed: u64,
    ) -> Self {
        let phases = vec![0.0; scene.animated.len()];
        Self {
            scene,
            clock: EngineClock::new(tick_duration),
            speed,
            phases,
            leak_fraction,
            seed,
        }
    }

    pub fn scene(&self) -> &Arc<Scene> {
        &self.scene
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn leak_fraction(&self) -> f64 {
        self.leak_fraction
    }

    pub fn is_paused(&self) -> bool {
        self.clock.native_paused
    }

    /// In-game time at which the ego reaches the end of the path.
    pub fn duration(&self) -> f64 {
        if self.speed > 0.0 {
            self.scene.path.length() / self.speed
        } else {
            f64::INFINITY
        }
    }

    /// Per-tick phase step of prop `k`.
    pub fn leak_step(&self, k: usize) -> f64 {
        self.scene.animated[k].rate * self.clock.tick_duration * self.leak_fraction
    }

    /// One engine step.
    pub fn advance_tick(&mut self) {
        self.clock.uni_tick += 1;
        if self.clock.native_paused {
            return;
        }
        self.clock.in_game_time += self.clock.step();
        for k in 0..self.phases.len() {
            self.phases[k] += self.leak_step(k);
        }
    }

    pub fn set_time_scale(&mut self, scale: f64) -> Result<(), SimError> {
        if !(scale >= 0.0) || !scale.is_finite() {
            return Err(SimError::InvalidTimeScale(scale));
        }
        self.clock.time_scale = scale;
        Ok(())
    }

    pub fn native_pause(&mut self) {
        self.clock.native_paused = true;
    }

    pub fn native_resume(&mut self) {
        self.clock.native_paused = false;
    }

    pub fn vehicle_pose(&self) -> Result<Pose, SimError> {
        self.vehicle_pose_at(self.clock.in_game_time)
    }

    /// Ego pose (x forward, y left, z up) at in-game time `t`.
    pub fn vehicle_pose_at(&self, t: f64) -> Result<Pose, SimError> {
        if !(t >= 0.0) {
            return Err(SimError::OutOfRange {
                value: t,
                limit: self.duration(),
            });
        }
        let s = self.speed * t;
        let p = self
            .scene
            .path
            .point_at(s)
            .map_err(|_| SimError::OutOfRange {
                value: t,
                limit: self.duration(),
            })?;
        Ok(Pose::from_yaw(
            p.heading,
            Vector3::new(p.position.x, p.position.y, 0.0),
        ))
    }

    /// Current center and heading of a traffic box.
    pub fn traffic_state(&self, traffic: &TrafficBox) -> (Vector3<f64>, f64) {
        let s = traffic.start_s - traffic.speed * self.clock.in_game_time;
        let p = self.scene.path.point_wrapped(s);
        let c = p.offset(traffic.lateral);
        (Vector3::new(c.x, c.y, traffic.size.z * 0.5), p.heading)
    }

    pub fn prop_phase(&self, k: usize) -> f64 {
        self.phases[k]
    }

    /// Triangles of all moving objects in their current state.
    pub fn dynamic_triangles(&self) -> Vec<Triangle> {
        let mut out = Vec::with_capacity(12 * (self.scene.traffic.len() + self.phases.len()));
        for t in &self.scene.traffic {
            let (c, yaw) = self.traffic_state(t);
            out.extend(scene::box_triangles(c, yaw, t.size, t.color, t.id));
        }
        for (k, prop) in self.scene.animated.iter().enumerate() {
            out.extend(scene::box_triangles(
                prop.center,
                self.phases[k],
                prop.size,
                prop.color,
                prop.id,
            ));
        }
        out
    }

    /// SHA-256 over the complete dynamic state.
    pub fn state_hash(&self) -> String {
        let mut h = Sha256::new();
        let c = &self.clock;
        h.update(c.uni_tick.to_le_bytes());
        for v in [
            c.in_game_time,
            c.time_scale,
            c.tick_duration,
            c.freeze_residual,
            self.speed,
        ] {
            h.update(v.to_bits().to_le_bytes());
        }
        h.update([c.native_paused as u8]);
        for p in &self.phases {
            h.update(p.to_bits().to_le_bytes());
        }
        if let Ok(pose) = self.vehicle_pose() {
            for v in pose.rotation.iter().chain(pose.translation.iter()) {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        for t in &self.scene.traffic {
            let (center, yaw) = self.traffic_state(t);
            for v in center.iter().chain(std::iter::once(&yaw)) {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    /// State hash ignoring the tick counter, for comparing scene content.
    pub fn scene_state_hash(&self) -> String {
        let mut w = self.clone();
        w.clock.uni_tick = 0;
        w.clock.native_paused = false;
        w.state_hash()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn world(speed_kmh: f64) -> World {
        let path = Path::from_spec(&PathSpec {
            start: [0.0, 0.0, 0.0],
            segments: vec![SegmentSpec::Straight { length: 500.0 }],
        })
        .unwrap();
        let scene = Scene::generate(path, &SceneSpec::default(), 5);
        World::new(Arc::new(scene), speed_kmh / 3.6, DEFAULT_TICK, 1.0, 5)
    }

    #[test]
    fn one_tick_at_unit_scale() {
        let mut w = world(10.0);
        w.advance_tick();
        assert_eq!(w.clock.uni_tick, 1);
        assert_eq!(w.clock.in_game_time, 1.0 / 60.0);
    }

    #[test]
    fn pseudo_pause_freezes_scripted_but_not_hard_coded() {
        let mut w = world(10.0);
        for _ in 0..5 {
            w.advance_tick();
        }
        let before = w.vehicle_pose().unwrap();
        let traffic_before = w.traffic_state(&w.scene().traffic[0]);
        let phase_before = w.prop_phase(0);
        w.set_time_scale(0.0).unwrap();
        w.advance_tick();
        assert_eq!(w.vehicle_pose().unwrap(), before);
        assert_eq!(w.traffic_state(&w.scene().traffic[0]), traffic_before);
        let moved = w.prop_phase(0) - phase_before;
        assert!((moved - w.leak_step(0)).abs() < 1e-15);
        assert!(moved > 0.0);
    }

    #[test]
    fn native_pause_stops_everything_but_the_counter() {
        let mut w = world(10.0);
        w.advance_tick();
        let hash = w.scene_state_hash();
        let t = w.clock.in_game_time;
        w.native_pause();
        for _ in 0..5 {
            w.advance_tick();
        }
        assert_eq!(w.clock.uni_tick, 6);
        assert_eq!(w.clock.in_game_time, t);
        assert_eq!(w.scene_state_hash(), hash);
    }

    #[test]
    fn pause_is_idempotent_and_resume_keeps_preset_scale() {
        let mut w = world(10.0);
        w.set_time_scale(0.0).unwrap();
        w.native_pause();
        let once = w.clone();
        w.native_pause();
        assert_eq!(w, once);
        w.native_resume();
        assert!(w.clock.is_pseudo_paused());
    }

    #[test]
    fn pause_tick_resume_restores_state() {
        let mut w = world(10.0);
        w.advance_tick();
        let before = w.scene_state_hash();
        w.native_pause();
        w.advance_tick();
        w.native_resume();
        assert_eq!(w.scene_state_hash(), before);
    }

    #[test]
    fn negative_time_scale_rejected() {
        let mut w = world(10.0);
        assert_eq!(
            w.set_time_scale(-0.5),
            Err(SimError::InvalidTimeScale(-0.5))
        );
        assert!(w.set_time_scale(f64::NAN).is_err());
        assert_eq!(w.clock.time_scale, 1.0);
    }

    #[test]
    fn double_scale_doubles_displacement() {
        let mut a = world(36.0);
        let mut b = world(36.0);
        b.set_time_scale(2.0).unwrap();
        for _ in 0..30 {
            a.advance_tick();
            b.advance_tick();
        }
        let da = a.vehicle_pose().unwrap().translation.x;
        let db = b.vehicle_pose().unwrap().translation.x;
        assert!((db - 2.0 * da).abs() <= 1e-12 * db);
    }

    #[test]
    fn straight_segment_speed() {
        let w = world(10.0);
        let p = w.vehicle_pose_at(1.0).unwrap();
        assert!((p.translation.x - 2.777_777_777_777_778).abs() < 1e-12);
        assert_eq!(w.vehicle_pose_at(0.0).unwrap(), Pose::identity());
        assert!(w.vehicle_pose_at(1e6).is_err());
        assert!(w.vehicle_pose_at(-1.0).is_err());
    }

    #[test]
    fn identical_runs_hash_identically() {
        let run = || {
            let mut w = world(25.0);
            let mut hashes = Vec::new();
            for k in 0..40 {
                if k == 10 {
                    w.set_time_scale(0.0).unwrap();
                }
                if k == 20 {
                    w.set_time_scale(1.0).unwrap();
                }
                w.advance_tick();
                hashes.push(w.state_hash());
            }
            hashes
        };
        assert_eq!(run(), run());
    }
}
