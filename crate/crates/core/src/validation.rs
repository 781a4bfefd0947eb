//! Capture → odometry → evaluation pipeline used by the validation harness.

use crate::capture::{
    run_session, spatial_offset, CaptureError, CaptureMethod, SampleSink, StereoSample,
};
use crate::dataset_io::{CalibrationRecord, DatasetWriter};
use crate::render::ConditionName;
use crate::scenario::ScenarioConfig;
use crate::traj_eval::{ape, rpe, Alignment, ApeReport, EvalError, RpeReport, Stamped};
use crate::vo::{run_vo, VoError, VoFrame, VoOptions};
use crate::Trajectory;

use nalgebra::Vector3;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Capture(#[from] CaptureError),
    #[error(transparent)]
    Vo(#[from] VoError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("session produced {0} frames; at least 3 are needed")]
    TooFewFrames(usize),
}

/// Left-camera poses of a capture, stamped with the capture time.
pub fn ground_truth(samples: &[StereoSample]) -> Result<Trajectory, EvalError> {
    Trajectory::new(
        samples
            .iter()
            .map(|s| Stamped {
                time: s.in_game_time,
                pose: *s.camera_pose(),
            })
            .collect(),
    )
}

pub fn vo_frames(samples: &[StereoSample]) -> Vec<VoFrame<f64>> {
    samples
        .iter()
        .map(|s| VoFrame {
            time: s.in_game_time,
            features: s.features.clone(),
        })
        .collect()
}

/// Mean distance between the recorded right camera and where a rigid rig
/// would have put it relative to the left camera.
pub fn measured_pair_offset(samples: &[StereoSample], baseline: f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples
        .iter()
        .map(|s| {
            let ideal = s
                .left
                .camera_pose
                .transform_point(&Vector3::new(baseline, 0.0, 0.0));
            (s.right.camera_pose.translation - ideal).norm()
        })
        .sum::<f64>()
        / samples.len() as f64
}

/// Odometry and metrics for one captured session.
#[derive(Debug, Clone)]
pub struct RunEvaluation {
    pub method: CaptureMethod,
    pub frames: usize,
    pub holes: usize,
    pub ground_truth: Trajectory,
    pub estimate: Trajectory,
    pub ape: ApeReport<f64>,
    pub rpe: RpeReport<f64>,
    pub mean_pair_offset: f64,
}

impl RunEvaluation {
    /// Headline figure: APE RMSE as a percentage of trajectory length.
    pub fn ape_pct(&self) -> Option<f64> {
        self.ape.percent.as_ref().map(|p| p.stats.rmse)
    }

    pub fn ape_m(&self) -> f64 {
        self.ape.meters.stats.rmse
    }
}

pub fn evaluate_samples(
    method: CaptureMethod,
    samples: &[StereoSample],
    config: &ScenarioConfig,
    options: &VoOptions,
) -> Result<RunEvaluation, PipelineError> {
    if samples.len() < 3 {
        return Err(PipelineError::TooFewFrames(samples.len()));
    }
    let calib = CalibrationRecord::from_rig(&config.rig, config.capture.depth_semantics)?;
    let gt = ground_truth(samples)?;
    let vo = run_vo(
        &vo_frames(samples),
        &calib.stereo(),
        gt.poses()[0].pose,
        options,
    )?;
    let ape = ape(&vo.trajectory, &gt, Alignment::None)?;
    let rpe = rpe(&vo.trajectory, &gt, 1)?;
    Ok(RunEvaluation {
        method,
        frames: samples.len(),
        holes: vo.holes.len(),
        ground_truth: gt,
        estimate: vo.trajectory,
        ape,
        rpe,
        mean_pair_offset: measured_pair_offset(samples, config.rig.baseline),
    })
}

/// Keeps pixel-free copies of the samples and optionally mirrors the full
/// samples to a dataset.
struct Tee<'a> {
    samples: Vec<StereoSample>,
    writer: Option<&'a mut DatasetWriter>,
}

impl SampleSink for Tee<'_> {
    fn begin(&mut self, info: &crate::capture::SessionInfo) -> Result<(), CaptureError> {
        self.samples.begin(info)?;
        match self.writer.as_deref_mut() {
            Some(w) => w.begin(info),
            None => Ok(()),
        }
    }

    fn write(&mut self, index: usize, sample: &StereoSample) -> Result<(), CaptureError> {
        self.samples.write(index, &sample.without_pixels())?;
        match self.writer.as_deref_mut() {
            Some(w) => SampleSink::write(w, index, sample),
            None => Ok(()),
        }
    }

    fn finish(
        &mut self,
        info: &crate::capture::SessionInfo,
        summary: &crate::capture::SessionSummary,
    ) -> Result<(), CaptureError> {
        match self.writer.as_deref_mut() {
            Some(w) => SampleSink::finish(w, info, summary),
            None => Ok(()),
        }
    }
}

/// Captures one session and evaluates odometry on it.
pub fn capture_and_evaluate(
    config: &ScenarioConfig,
    method: CaptureMethod,
    condition: ConditionName,
    writer: Option<&mut DatasetWriter>,
    options: &VoOptions,
) -> Result<RunEvaluation, PipelineError> {
    let mut tee = Tee {
        samples: Vec::new(),
        writer,
    };
    run_session(config, method, condition, &mut tee)?;
    evaluate_samples(method, &tee.samples, config, options)
}

/// Nominal offsets implied by the configuration, metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NominalOffsets {
    pub tefs: f64,
    pub naive: f64,
}

pub fn nominal_offsets(config: &ScenarioConfig) -> NominalOffsets {
    NominalOffsets {
        tefs: spatial_offset(config.speed(), config.engine_disparity()),
        naive: spatial_offset(config.speed(), config.tick_duration),
    }
}

/// TeFS against the dual-viewport reference on one scenario.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub candidate: RunEvaluation,
    pub reference: RunEvaluation,
}

impl Comparison {
    /// `|APE%(candidate) − APE%(reference)|`; `None` for a stationary run.
    pub fn ape_pct_delta(&self) -> Option<f64> {
        Some((self.candidate.ape_pct()? - self.reference.ape_pct()?).abs())
    }

    pub fn ape_m_delta(&self) -> f64 {
        (self.candidate.ape_m() - self.reference.ape_m()).abs()
    }

    pub fn rpe_delta(&self) -> f64 {
        (self.candidate.rpe.translation.stats.rmse - self.reference.rpe.translation.stats.rmse)
            .abs()
    }
}

pub fn compare(
    config: &ScenarioConfig,
    candidate: CaptureMethod,
    condition: ConditionName,
    options: &VoOptions,
) -> Result<Comparison, PipelineError> {
    Ok(Comparison {
        candidate: capture_and_evaluate(config, candidate, condition, None, options)?,
        reference: capture_and_evaluate(
            config,
            CaptureMethod::DualViewport,
            condition,
            None,
            options,
        )?,
    })
}
