use std::fmt;

use serde::{Deserialize, Serialize};

use super::align::umeyama;
use super::{traj_length, EvalError, Stamped, Trajectory};
use crate::geometry::{Se3, Similarity};
use crate::scalar::{lit, Real};

/// How the estimate is registered to ground truth before APE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alignment {
    /// Compare in the recorded frames (both start from the same origin pose).
    #[default]
    None,
    Rigid,
    Similarity,
}

impl fmt::Display for Alignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::Rigid => "rigid",
            Self::Similarity => "similarity",
        })
    }
}

impl std::str::FromStr for Alignment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" | "origin" => Ok(Self::None),
            "rigid" | "se3" => Ok(Self::Rigid),
            "similarity" | "sim3" => Ok(Self::Similarity),
            other => Err(format!("unknown alignment `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetricKind {
    ApeMeters,
    ApePercent,
    RpeTranslation,
    RpeRotation,
}

impl MetricKind {
    pub fn label(self) -> &'static str {
        match self {
            Self::ApeMeters => "APE(m)",
            Self::ApePercent => "APE(%)",
            Self::RpeTranslation => "RPE(m)",
            Self::RpeRotation => "RPE(deg)",
        }
    }
}

/// Summary statistics of an error sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Statistics<T: Real> {
    pub mean: T,
    pub median: T,
    pub rmse: T,
    pub max: T,
    pub count: usize,
}

impl<T: Real> Statistics<T> {
    /// Statistics over `errors`; all zero for an empty slice.
    pub fn from_errors(errors: &[T]) -> Self {
        if errors.is_empty() {
            return Self {
                mean: T::zero(),
                median: T::zero(),
                rmse: T::zero(),
                max: T::zero(),
                count: 0,
            };
        }
        let n: T = lit(errors.len() as f64);
        let sum = errors.iter().fold(T::zero(), |a, &e| a + e);
        let sq = errors.iter().fold(T::zero(), |a, &e| a + e * e);
        let max = errors.iter().fold(T::zero(), |a, &e| a.max(e));
        let mut sorted = errors.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        let mid = sorted.len() / 2;
        let median = if sorted.len().is_multiple_of(2) {
            (sorted[mid - 1] + sorted[mid]) * lit(0.5)
        } else {
            sorted[mid]
        };
        Self {
            mean: sum / n,
            median,
            rmse: (sq / n).sqrt(),
            max,
            count: errors.len(),
        }
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            mean: self.mean * factor,
            median: self.median * factor,
            rmse: self.rmse * factor,
            max: self.max * factor,
            count: self.count,
        }
    }
}

/// One metric's statistics plus the context needed to interpret them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport<T: Real> {
    pub kind: MetricKind,
    pub stats: Statistics<T>,
    pub alignment: Alignment,
    /// Ground-truth trajectory length in meters.
    pub trajectory_length: T,
    /// Estimated poses dropped by timestamp association.
    pub unmatched: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApeReport<T: Real> {
    pub meters: MetricReport<T>,
    /// `None` when the ground truth has zero length.
    pub percent: Option<MetricReport<T>>,
    pub transform: Similarity<T>,
    pub errors: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RpeReport<T: Real> {
    pub translation: MetricReport<T>,
    pub rotation: MetricReport<T>,
    pub delta: usize,
}

/// Index pairs `(est, gt)` matched by nearest timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct Association {
    pub pairs: Vec<(usize, usize)>,
    pub unmatched: usize,
}

/// Half the median ground-truth sampling interval.
pub(crate) fn default_tolerance<T: Real>(gt: &Trajectory<T>) -> T {
    let mut dts: Vec<T> = gt
        .poses()
        .windows(2)
        .map(|w| w[1].time - w[0].time)
        .collect();
    if dts.is_empty() {
        return lit(1e-9);
    }
    dts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    dts[dts.len() / 2] * lit(0.5)
}

/// Matches each estimated pose to the nearest ground-truth pose in time,
/// keeping matches within `tolerance` and one-to-one.
pub fn associate<T: Real>(
    est: &Trajectory<T>,
    gt: &Trajectory<T>,
    tolerance: T,
) -> Result<Association, EvalError> {
    let gt_times: Vec<T> = gt.iter().map(|s| s.time).collect();
    let mut pairs = Vec::with_capacity(est.len());
    let mut last_gt: Option<usize> = None;
    for (ei, s) in est.iter().enumerate() {
        let idx = gt_times.partition_point(|&t| t < s.time);
        let candidates = [
            idx.checked_sub(1),
            Some(idx).filter(|&i| i < gt_times.len()),
        ];
        let best = candidates.into_iter().flatten().min_by(|&a, &b| {
            let da = (gt_times[a] - s.time).abs();
            let db = (gt_times[b] - s.time).abs();
            da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal)
        });
        if let Some(gi) = best {
            let within = (gt_times[gi] - s.time).abs() <= tolerance;
            let fresh = last_gt.is_none_or(|l| gi > l);
            if within && fresh {
                pairs.push((ei, gi));
                last_gt = Some(gi);
            }
        }
    }
    if pairs.is_empty() {
        return Err(EvalError::EmptyAssociation);
    }
    let unmatched = est.len() - pairs.len();
    Ok(Association { pairs, unmatched })
}

/// Absolute pose error with the default association tolerance.
pub fn ape<T: Real>(
    est: &Trajectory<T>,
    gt: &Trajectory<T>,
    alignment: Alignment,
) -> Result<ApeReport<T>, EvalError> {
    ape_with(est, gt, alignment, default_tolerance(gt))
}

pub fn ape_with<T: Real>(
    est: &Trajectory<T>,
    gt: &Trajectory<T>,
    alignment: Alignment,
    tolerance: T,
) -> Result<ApeReport<T>, EvalError> {
    let assoc = associate(est, gt, tolerance)?;
    let gt_len = traj_length(gt)?;
    let (src, dst): (Vec<_>, Vec<_>) = assoc
        .pairs
        .iter()
        .map(|&(e, g)| {
            (
                est.poses()[e].pose.translation,
                gt.poses()[g].pose.translation,
            )
        })
        .unzip();
    let transform = match alignment {
        Alignment::None => Similarity::identity(),
        Alignment::Rigid => umeyama(&src, &dst, false)?,
        Alignment::Similarity => umeyama(&src, &dst, true)?,
    };
    let errors: Vec<T> = src
        .iter()
        .zip(&dst)
        .map(|(s, d)| (transform.apply_point(s) - d).norm())
        .collect();
    let stats = Statistics::from_errors(&errors);
    let meters = MetricReport {
        kind: MetricKind::ApeMeters,
        stats,
        alignment,
        trajectory_length: gt_len,
        unmatched: assoc.unmatched,
    };
    let percent = (gt_len > T::zero()).then(|| MetricReport {
        kind: MetricKind::ApePercent,
        stats: stats.scaled(lit::<T>(100.0) / gt_len),
        ..meters
    });
    Ok(ApeReport {
        meters,
        percent,
        transform,
        errors,
    })
}

fn relative<T: Real>(a: &Stamped<T>, b: &Stamped<T>) -> Se3<T> {
    a.pose.inverse().compose(&b.pose)
}

fn rpe_pairs<T: Real>(
    est: &Trajectory<T>,
    gt: &Trajectory<T>,
    assoc: &Association,
    steps: &[(usize, usize)],
    delta: usize,
    gt_len: T,
) -> RpeReport<T> {
    let mut trans = Vec::with_capacity(steps.len());
    let mut rot = Vec::with_capacity(steps.len());
    for &(i, j) in steps {
        let (ei, gi) = assoc.pairs[i];
        let (ej, gj) = assoc.pairs[j];
        let q = relative(&gt.poses()[gi], &gt.poses()[gj]);
        let p = relative(&est.poses()[ei], &est.poses()[ej]);
        let e = q.inverse().compose(&p);
        trans.push(e.translation.norm());
        rot.push(e.rotation_angle() * lit(180.0) / T::pi());
    }
    let base = MetricReport {
        kind: MetricKind::RpeTranslation,
        stats: Statistics::from_errors(&trans),
        alignment: Alignment::None,
        trajectory_length: gt_len,
        unmatched: assoc.unmatched,
    };
    RpeReport {
        translation: base,
        rotation: MetricReport {
            kind: MetricKind::RpeRotation,
            stats: Statistics::from_errors(&rot),
            ..base
        },
        delta,
    }
}

/// Relative pose error over pairs `delta` associated frames apart.
pub fn rpe<T: Real>(
    est: &Trajectory<T>,
    gt: &Trajectory<T>,
    delta: usize,
) -> Result<RpeReport<T>, EvalError> {
    rpe_with(est, gt, delta, default_tolerance(gt))
}

pub fn rpe_with<T: Real>(
    est: &Trajectory<T>,
    gt: &Trajectory<T>,
    delta: usize,
    tolerance: T,
) -> Result<RpeReport<T>, EvalError> {
    let assoc = associate(est, gt, tolerance)?;
    let n = assoc.pairs.len();
    if delta == 0 || delta >= n {
        return Err(EvalError::DeltaTooLarge { delta, len: n });
    }
    let gt_len = traj_length(gt)?;
    let steps: Vec<_> = (0..n - delta).map(|i| (i, i + delta)).collect();
    Ok(rpe_pairs(est, gt, &assoc, &steps, delta, gt_len))
}

/// Relative pose error over all pairs separated by `distance` meters of
/// ground-truth path. `delta` in the report holds the number of pairs.
pub fn rpe_by_distance<T: Real>(
    est: &Trajectory<T>,
    gt: &Trajectory<T>,
    distance: T,
) -> Result<RpeReport<T>, EvalError> {
    let assoc = associate(est, gt, default_tolerance(gt))?;
    let gt_len = traj_length(gt)?;
    let mut along = Vec::with_capacity(assoc.pairs.len());
    let mut acc = T::zero();
    for (k, &(_, g)) in assoc.pairs.iter().enumerate() {
        if k > 0 {
            let prev = assoc.pairs[k - 1].1;
            acc += (gt.poses()[g].pose.translation - gt.poses()[prev].pose.translation).norm();
        }
        along.push(acc);
    }
    let mut steps = Vec::new();
    for i in 0..along.len() {
        let target = along[i] + distance;
        let j = along.partition_point(|&d| d < target);
        if j < along.len() {
            steps.push((i, j));
        }
    }
    if steps.is_empty() {
        return Err(EvalError::DeltaTooLarge {
            delta: 0,
            len: assoc.pairs.len(),
        });
    }
    let count = steps.len();
    Ok(rpe_pairs(est, gt, &assoc, &steps, count, gt_len))
}

/// Multiplies estimated translations by `L_gt / L_est`.
pub fn scale_correct<T: Real>(
    est: &Trajectory<T>,
    gt: &Trajectory<T>,
) -> Result<Trajectory<T>, EvalError> {
    let l_est = traj_length(est)?;
    let l_gt = traj_length(gt)?;
    if !(l_est > T::zero()) {
        return Err(EvalError::ZeroLength);
    }
    Ok(est.scaled(l_gt / l_est))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn wiggle(n: usize) -> Trajectory<f64> {
        Trajectory::from_poses((0..n).map(|i| {
            let t = i as f64;
            Se3::from_yaw(0.1 * t, Vector3::new(t, (0.3 * t).sin(), 0.05 * t))
        }))
    }

    #[test]
    fn identical_trajectories_score_zero() {
        let gt = wiggle(20);
        let r = ape(&gt, &gt, Alignment::None).unwrap();
        assert_eq!(r.meters.stats.max, 0.0);
        assert_eq!(r.percent.unwrap().stats.max, 0.0);
        let r = rpe(&gt, &gt, 1).unwrap();
        assert!(r.translation.stats.max < 1e-12);
        assert!(r.rotation.stats.max < 1e-6);
    }

    #[test]
    fn constant_offset_ape() {
        let est = wiggle(20);
        let gt =
            est.map_poses(|p| Se3::new(p.rotation, p.translation + Vector3::new(1.0, 0.0, 0.0)));
        let r = ape(&est, &gt, Alignment::None).unwrap();
        assert!((r.meters.stats.mean - 1.0).abs() < 1e-12);
        let len = traj_length(&gt).unwrap();
        assert!((r.percent.unwrap().stats.mean - 100.0 / len).abs() < 1e-12);
    }

    #[test]
    fn single_perturbed_pose_gives_two_step_errors() {
        let gt = Trajectory::from_poses(
            (0..6).map(|i| Se3::from_translation(Vector3::new(i as f64, 0.0, 0.0))),
        );
        let est = gt.map_poses(|p| *p);
        let mut poses: Vec<_> = est.poses().to_vec();
        poses[3].pose.translation.y += 0.1;
        let est = Trajectory::new(poses).unwrap();
        let r = rpe(&est, &gt, 1).unwrap();
        assert_eq!(r.translation.stats.count, 5);
        // Steps 2→3 and 3→4 each carry a 0.1 m lateral error.
        let sq = 2.0 * 0.1_f64.powi(2);
        assert!((r.translation.stats.rmse - (sq / 5.0).sqrt()).abs() < 1e-12);
        assert!((r.translation.stats.max - 0.1).abs() < 1e-12);
        assert!((r.translation.stats.mean - 0.2 / 5.0).abs() < 1e-12);
    }

    #[test]
    fn global_rotation_leaves_rpe_unchanged() {
        let gt = wiggle(15);
        let g = Se3::from_axis_angle(
            Vector3::new(0.2, 1.0, -0.4),
            1.1,
            Vector3::new(5.0, -2.0, 1.0),
        );
        let est = gt.map_poses(|p| g.compose(p));
        let r = rpe(&est, &gt, 1).unwrap();
        assert!(r.translation.stats.max < 1e-9);
        assert!(r.rotation.stats.max < 1e-5);
    }

    #[test]
    fn delta_must_fit() {
        let gt = wiggle(4);
        assert!(matches!(
            rpe(&gt, &gt, 4),
            Err(EvalError::DeltaTooLarge { .. })
        ));
    }

    #[test]
    fn scale_correction_restores_length() {
        let gt = wiggle(30);
        let est = gt.scaled(3.0);
        let fixed = scale_correct(&est, &gt).unwrap();
        let lg = traj_length(&gt).unwrap();
        assert!((traj_length(&fixed).unwrap() - lg).abs() / lg < 1e-12);
        let same = scale_correct(&gt, &gt).unwrap();
        assert_eq!(same, gt);
    }

    #[test]
    fn zero_length_estimate_rejected() {
        let gt = wiggle(5);
        let est = Trajectory::from_poses((0..5).map(|_| Se3::identity()));
        assert_eq!(scale_correct(&est, &gt), Err(EvalError::ZeroLength));
    }

    #[test]
    fn association_drops_far_poses() {
        let gt = wiggle(10);
        let mut shifted: Vec<_> = gt.poses().to_vec();
        shifted.push(Stamped {
            time: 50.0,
            pose: Se3::identity(),
        });
        let est = Trajectory::new(shifted).unwrap();
        let a = associate(&est, &gt, 0.5).unwrap();
        assert_eq!(a.pairs.len(), 10);
        assert_eq!(a.unmatched, 1);
    }

    #[test]
    fn empty_association_is_error() {
        let gt = wiggle(5);
        let est = Trajectory::new(
            gt.poses()
                .iter()
                .map(|s| Stamped {
                    time: s.time + 100.0,
                    pose: s.pose,
                })
                .collect(),
        )
        .unwrap();
        assert_eq!(
            ape(&est, &gt, Alignment::None).unwrap_err(),
            EvalError::EmptyAssociation
        );
    }

    #[test]
    fn distance_mode_pairs() {
        let gt = Trajectory::from_poses(
            (0..21).map(|i| Se3::from_translation(Vector3::new(i as f64 * 10.0, 0.0, 0.0))),
        );
        let r = rpe_by_distance(&gt, &gt, 100.0).unwrap();
        assert_eq!(r.delta, 11);
        assert!(r.translation.stats.max < 1e-12);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(Statistics::from_errors(&[3.0, 1.0, 2.0]).median, 2.0);
        assert_eq!(Statistics::from_errors(&[4.0, 1.0, 2.0, 3.0]).median, 2.5);
    }
}
