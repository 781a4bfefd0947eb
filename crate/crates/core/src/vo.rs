//! Stereo odometry over beacon correspondences: rectified triangulation,
//! 3D-3D rigid registration between consecutive frames, dead reckoning.

use std::collections::BTreeMap;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::geometry::Se3;
use crate::scalar::{lit, to_f64, Real};
use crate::traj_eval::{umeyama, EvalError, Stamped, Trajectory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VoError {
    #[error("beacon {id}: disparity {disparity} px is not positive")]
    NonPositiveDisparity { id: u32, disparity: f64 },
    #[error("frame {frame}: {negative} of {total} observations have negative disparity; left and right look swapped")]
    SwappedStereo {
        frame: usize,
        negative: usize,
        total: usize,
    },
    #[error("need at least 3 shared correspondences, found {0}")]
    TooFewCorrespondences(usize),
    #[error("invalid noise sigma {0}")]
    InvalidNoise(f64),
    #[error("no frames")]
    Empty,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// A beacon seen in both images of a rectified pair, in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureObservation<T: Real> {
    pub id: u32,
    pub left: [T; 2],
    pub right: [T; 2],
}

impl<T: Real> FeatureObservation<T> {
    pub fn disparity(&self) -> T {
        self.left[0] - self.right[0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StereoCalibration<T: Real> {
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
    pub baseline: T,
}

/// Point in the left camera frame (x right, y down, z forward).
pub fn triangulate_stereo<T: Real>(
    obs: &FeatureObservation<T>,
    calib: &StereoCalibration<T>,
) -> Result<Vector3<T>, VoError> {
    let d = obs.disparity();
    if !(d > T::zero()) {
        return Err(VoError::NonPositiveDisparity {
            id: obs.id,
            disparity: to_f64(d),
        });
    }
    let z = calib.fx * calib.baseline / d;
    Ok(Vector3::new(
        (obs.left[0] - calib.cx) * z / calib.fx,
        (obs.left[1] - calib.cy) * z / calib.fy,
        z,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionEstimate<T: Real> {
    /// Pose of the current camera in the previous camera's frame.
    pub motion: Se3<T>,
    /// RMS of the registration residuals, metres.
    pub residual_rms: T,
    pub correspondences: usize,
}

/// Rigid motion between two id-keyed point sets; `prev ≈ motion · curr`.
pub fn estimate_motion<T: Real>(
    prev: &BTreeMap<u32, Vector3<T>>,
    curr: &BTreeMap<u32, Vector3<T>>,
) -> Result<MotionEstimate<T>, VoError> {
    let (src, dst): (Vec<_>, Vec<_>) = curr
        .iter()
        .filter_map(|(id, c)| prev.get(id).map(|p| (*c, *p)))
        .unzip();
    if src.len() < 3 {
        return Err(VoError::TooFewCorrespondences(src.len()));
    }
    let sim = umeyama(&src, &dst, false)?;
    let motion = sim.rigid();
    let sq = src.iter().zip(&dst).fold(T::zero(), |acc, (s, d)| {
        acc + (motion.transform_point(s) - d).norm_squared()
    });
    Ok(MotionEstimate {
        motion,
        residual_rms: (sq / lit(src.len() as f64)).sqrt(),
        correspondences: src.len(),
    })
}

/// One frame of VO input.
#[derive(Debug, Clone, PartialEq)]
pub struct VoFrame<T: Real> {
    pub time: T,
    pub features: Vec<FeatureObservation<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoResult<T: Real> {
    /// Poses of the frames that could be registered.
    pub trajectory: Trajectory<T>,
    /// Indices of frames skipped for lack of correspondences.
    pub holes: Vec<usize>,
    pub residuals: Vec<T>,
}

impl<T: Real> VoResult<T> {
    pub fn is_partial(&self) -> bool {
        !self.holes.is_empty()
    }
}

/// Odometry settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoOptions {
    /// Gaussian pixel noise added to every observed coordinate, px.
    pub noise_sigma: f64,
    pub seed: u64,
    /// Points deeper than this many baselines are not used; their depth
    /// is too noisy to help.
    pub max_depth_baselines: Option<f64>,
}

/// Conventional close-point limit for stereo odometry.
pub const DEFAULT_MAX_DEPTH_BASELINES: f64 = 40.0;

impl Default for VoOptions {
    fn default() -> Self {
        Self {
            noise_sigma: 0.0,
            seed: 0,
            max_depth_baselines: Some(DEFAULT_MAX_DEPTH_BASELINES),
        }
    }
}

fn triangulate_frame<T: Real>(
    index: usize,
    features: &[FeatureObservation<T>],
    calib: &StereoCalibration<T>,
    max_depth: Option<T>,
) -> Result<BTreeMap<u32, Vector3<T>>, VoError> {
    let mut points = BTreeMap::new();
    let mut negative = 0;
    for obs in features {
        match triangulate_stereo(obs, calib) {
            Ok(p) => {
                if max_depth.is_none_or(|m| p.z <= m) {
                    points.insert(obs.id, p);
                }
            }
            Err(_) => negative += 1,
        }
    }
    // Isolated non-positive disparities are noise; a majority means the
    // pair is mislabelled and inverting it silently would hide that.
    if negative > 0 && 2 * negative > features.len() {
        return Err(VoError::SwappedStereo {
            frame: index,
            negative,
            total: features.len(),
        });
    }
    Ok(points)
}

/// Chains frame-to-frame motions starting at `first_pose`. Noise is drawn
/// from a generator seeded with `options.seed`, so runs are reproducible.
pub fn run_vo<T: Real>(
    frames: &[VoFrame<T>],
    calib: &StereoCalibration<T>,
    first_pose: Se3<T>,
    options: &VoOptions,
) -> Result<VoResult<T>, VoError> {
    let noise_sigma = options.noise_sigma;
    let max_depth = options
        .max_depth_baselines
        .map(|k| lit::<T>(k) * calib.baseline);
    if frames.is_empty() {
        return Err(VoError::Empty);
    }
    if !(noise_sigma >= 0.0) || !noise_sigma.is_finite() {
        return Err(VoError::InvalidNoise(noise_sigma));
    }
    let normal = Normal::new(0.0, noise_sigma).map_err(|_| VoError::InvalidNoise(noise_sigma))?;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut perturb = |f: &[FeatureObservation<T>]| -> Vec<FeatureObservation<T>> {
        if noise_sigma == 0.0 {
            return f.to_vec();
        }
        f.iter()
            .map(|o| {
                let mut n = || lit::<T>(normal.sample(&mut rng));
                FeatureObservation {
                    id: o.id,
                    left: [o.left[0] + n(), o.left[1] + n()],
                    right: [o.right[0] + n(), o.right[1] + n()],
                }
            })
            .collect()
    };

    let mut stamped = vec![Stamped {
        time: frames[0].time,
        pose: first_pose,
    }];
    let mut residuals = Vec::new();
    let mut holes = Vec::new();
    let mut pose = first_pose;
    let mut prev = triangulate_frame(0, &perturb(&frames[0].features), calib, max_depth)?;
    for (k, frame) in frames.iter().enumerate().skip(1) {
        let curr = triangulate_frame(k, &perturb(&frame.features), calib, max_depth)?;
        match estimate_motion(&prev, &curr) {
            Ok(est) => {
                pose = pose.compose(&est.motion);
                stamped.push(Stamped {
                    time: frame.time,
                    pose,
                });
                residuals.push(est.residual_rms);
                prev = curr;
            }
            Err(VoError::TooFewCorrespondences(_))
            | Err(VoError::Eval(EvalError::Degenerate(_))) => {
                holes.push(k);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(VoResult {
        trajectory: Trajectory::new(stamped)?,
        holes,
        residuals,
    })
}
