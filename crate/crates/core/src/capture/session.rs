use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    run_dual_viewport_cycle, run_naive_swap_cycle, run_tefs_cycle, CaptureError, CaptureMethod,
    CycleSchedule, Engine, StereoSample,
};
use crate::depth::DepthSemantics;
use crate::render::{
    apply_condition, CameraRig, ConditionName, ConditionProfile, FrameBuffer, RigSpec,
};
use crate::scenario::ScenarioConfig;
use crate::sim::scene::BEACON_FLAG;
use crate::sim::{Path, Scene, World};
use crate::vo::FeatureObservation;

/// Everything about a session that is fixed before the first cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionInfo {
    pub scenario: String,
    pub method: CaptureMethod,
    pub condition: ConditionName,
    pub seed: u64,
    pub speed_kmh: f64,
    pub tick_duration: f64,
    pub leak_fraction: f64,
    pub engine_disparity_ms: f64,
    pub schedule: CycleSchedule,
    pub depth_semantics: DepthSemantics,
    pub rig: RigSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionSummary {
    pub frames: usize,
    /// Path length of the recorded left-camera trajectory, metres.
    pub trajectory_length: f64,
    pub complete: bool,
    /// Diagnostic of the error that ended an incomplete session.
    pub error: Option<String>,
}

/// Destination for captured samples.
pub trait SampleSink {
    fn begin(&mut self, info: &SessionInfo) -> Result<(), CaptureError>;
    fn write(&mut self, index: usize, sample: &StereoSample) -> Result<(), CaptureError>;
    fn finish(&mut self, info: &SessionInfo, summary: &SessionSummary) -> Result<(), CaptureError>;
}

/// Collects samples in memory.
impl SampleSink for Vec<StereoSample> {
    fn begin(&mut self, _: &SessionInfo) -> Result<(), CaptureError> {
        self.clear();
        Ok(())
    }

    fn write(&mut self, index: usize, sample: &StereoSample) -> Result<(), CaptureError> {
        if index != self.len() {
            return Err(CaptureError::Sink(format!(
                "sample index {index} out of sequence"
            )));
        }
        self.push(sample.clone());
        Ok(())
    }

    fn finish(&mut self, _: &SessionInfo, _: &SessionSummary) -> Result<(), CaptureError> {
        Ok(())
    }
}

/// Builds the engine for a scenario, with the residual per pseudo-paused
/// tick set so a TeFS pair spans exactly the configured disparity.
pub fn build_world(config: &ScenarioConfig) -> Result<Engine, CaptureError> {
    config
        .validate()
        .map_err(|e| CaptureError::Config(e.to_string()))?;
    let path = Path::from_spec(&config.path)?;
    let scene = Scene::generate(path, &config.scene, config.seed);
    let mut world = World::new(
        Arc::new(scene),
        config.speed(),
        config.tick_duration,
        config.leak_fraction,
        config.seed,
    );
    world.clock.freeze_residual =
        config.engine_disparity() / config.capture.schedule.swap_ticks() as f64;
    let rig = CameraRig::new(config.rig.clone())?;
    Engine::new(world, rig, config.capture.depth_semantics)
}

/// Beacons whose center pixel shows the beacon itself in both views,
/// with their exact projections.
pub fn observe_beacons(
    scene: &Scene,
    rig: &CameraRig,
    left: &FrameBuffer,
    right: &FrameBuffer,
) -> Vec<FeatureObservation<f64>> {
    let k = rig.intrinsics();
    let spec = rig.spec();
    let project = |frame: &FrameBuffer, id: u32, p: &nalgebra::Vector3<f64>| -> Option<[f64; 2]> {
        let q = frame.camera_pose.inverse_transform_point(p);
        if !(q.z > spec.near && q.z < spec.far) {
            return None;
        }
        let u = k.fx * q.x / q.z + k.cx;
        let v = k.fy * q.y / q.z + k.cy;
        if !(u >= 0.0 && v >= 0.0 && u < frame.width as f64 && v < frame.height as f64) {
            return None;
        }
        let idx = v as usize * frame.width + u as usize;
        (frame.object_ids[idx] == BEACON_FLAG | id).then_some([u, v])
    };
    scene
        .beacons
        .iter()
        .filter_map(|b| {
            let l = project(left, b.id, &b.position)?;
            let r = project(right, b.id, &b.position)?;
            Some(FeatureObservation {
                id: b.id,
                left: l,
                right: r,
            })
        })
        .collect()
}

fn degrade(sample: &mut StereoSample, profile: &ConditionProfile, seed: u64, index: usize) {
    if profile.is_identity() {
        return;
    }
    for (stream, frame) in [(0u64, &mut sample.left), (1, &mut sample.right)] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(2 * index as u64 + stream);
        *frame = apply_condition(frame, profile, &mut rng);
    }
}

/// Runs capture cycles over the scenario and streams samples into `sink`.
/// A failing cycle still finalizes the sink, flagged incomplete.
pub fn run_session<S: SampleSink + ?Sized>(
    config: &ScenarioConfig,
    method: CaptureMethod,
    condition: ConditionName,
    sink: &mut S,
) -> Result<SessionSummary, CaptureError> {
    let mut engine = build_world(config)?;
    let schedule = config.capture.schedule;
    let info = SessionInfo {
        scenario: config.name.clone(),
        method,
        condition,
        seed: config.seed,
        speed_kmh: config.speed_kmh,
        tick_duration: config.tick_duration,
        leak_fraction: config.leak_fraction,
        engine_disparity_ms: config.capture.engine_disparity_ms,
        schedule,
        depth_semantics: config.capture.depth_semantics,
        rig: config.rig.clone(),
    };
    let profile = ConditionProfile::from_name(condition);
    let per_cycle = schedule.cycle_game_time(
        method,
        config.tick_duration,
        engine.world.clock.freeze_residual,
    );
    let duration = engine.world.duration();

    sink.begin(&info)?;
    let mut summary = SessionSummary {
        frames: 0,
        trajectory_length: 0.0,
        complete: true,
        error: None,
    };
    let mut last_position: Option<nalgebra::Vector3<f64>> = None;
    let outcome = (|| -> Result<(), CaptureError> {
        loop {
            match config.cycles {
                Some(n) if summary.frames >= n => break,
                None if engine.world.clock.in_game_time + per_cycle > duration - 1e-9 => break,
                _ => {}
            }
            let mut sample = match method {
                CaptureMethod::Tefs => run_tefs_cycle(&mut engine, schedule)?,
                CaptureMethod::NaiveSwap => run_naive_swap_cycle(&mut engine, schedule)?,
                CaptureMethod::DualViewport => run_dual_viewport_cycle(&mut engine, schedule)?,
            };
            degrade(&mut sample, &profile, config.seed, summary.frames);
            let position = sample.camera_pose().translation;
            if let Some(prev) = last_position {
                summary.trajectory_length += (position - prev).norm();
            }
            last_position = Some(position);
            sink.write(summary.frames, &sample)?;
            summary.frames += 1;
        }
        Ok(())
    })();
    if let Err(e) = &outcome {
        summary.complete = false;
        summary.error = Some(e.to_string());
    }
    sink.finish(&info, &summary)?;
    outcome.map(|()| summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(cycles: Option<usize>, length: f64) -> ScenarioConfig {
        let cycles = cycles.map(|c| format!("cycles = {c}")).unwrap_or_default();
        ScenarioConfig::from_toml(&format!(
            r#"
name = "session"
seed = 11
speed_kmh = 36.0
{cycles}

[path]
start = [0.0, 0.0, 0.0]
segments = [{{ kind = "straight", length = {length} }}]
"#
        ))
        .unwrap()
    }

    #[test]
    fn fixed_cycle_count() {
        let mut out = Vec::new();
        let s = run_session(
            &config(Some(6), 100.0),
            CaptureMethod::Tefs,
            ConditionName::ExtraSunny,
            &mut out,
        )
        .unwrap();
        assert_eq!((s.frames, out.len()), (6, 6));
        assert!(s.complete);
        // 10 m/s: 7 full-rate ticks plus 3 residual ticks per cycle.
        let per = 7.0 / 60.0 * 10.0 + 3.0 * 0.000125 * 10.0;
        assert!((s.trajectory_length - 5.0 * per).abs() < 1e-9);
    }

    #[test]
    fn runs_to_end_of_path() {
        let mut out = Vec::new();
        let s = run_session(
            &config(None, 12.0),
            CaptureMethod::NaiveSwap,
            ConditionName::ExtraSunny,
            &mut out,
        )
        .unwrap();
        // 10 ticks at 10 m/s cover 5/3 m; 7 whole cycles fit in 12 m.
        assert_eq!(s.frames, 7);
    }

    #[test]
    fn overrun_is_flagged_incomplete() {
        struct Probe(Option<SessionSummary>);
        impl SampleSink for Probe {
            fn begin(&mut self, _: &SessionInfo) -> Result<(), CaptureError> {
                Ok(())
            }
            fn write(&mut self, _: usize, _: &StereoSample) -> Result<(), CaptureError> {
                Ok(())
            }
            fn finish(&mut self, _: &SessionInfo, s: &SessionSummary) -> Result<(), CaptureError> {
                self.0 = Some(s.clone());
                Ok(())
            }
        }
        let mut probe = Probe(None);
        let err = run_session(
            &config(Some(50), 10.0),
            CaptureMethod::Tefs,
            ConditionName::ExtraSunny,
            &mut probe,
        );
        assert!(err.is_err());
        let s = probe.0.unwrap();
        assert!(!s.complete);
        assert!(s.frames > 0 && s.frames < 50);
        assert!(s.error.is_some());
    }

    #[test]
    fn storm_degrades_rgb_only_and_is_reproducible() {
        let cfg = config(Some(2), 50.0);
        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut clean = Vec::new();
        run_session(
            &cfg,
            CaptureMethod::Tefs,
            ConditionName::NightThunderstorm,
            &mut a,
        )
        .unwrap();
        run_session(
            &cfg,
            CaptureMethod::Tefs,
            ConditionName::NightThunderstorm,
            &mut b,
        )
        .unwrap();
        run_session(
            &cfg,
            CaptureMethod::Tefs,
            ConditionName::ExtraSunny,
            &mut clean,
        )
        .unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].left.rgb, clean[0].left.rgb);
        assert_eq!(a[0].left_depth, clean[0].left_depth);
        assert_eq!(a[0].features, clean[0].features);
        assert_ne!(a[0].left.rgb, a[0].right.rgb);
    }
}
