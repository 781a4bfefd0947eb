use nalgebra::Vector3;

use super::EvalError;
use crate::geometry::Se3;
use crate::scalar::Real;

/// A pose with its timestamp in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stamped<T: Real> {
    pub time: T,
    pub pose: Se3<T>,
}

/// Timestamped pose sequence with strictly increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T: Real> {
    poses: Vec<Stamped<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn new(poses: Vec<Stamped<T>>) -> Result<Self, EvalError> {
        if let Some(index) = poses.windows(2).position(|w| !(w[1].time > w[0].time)) {
            return Err(EvalError::NonMonotonicTime { index: index + 1 });
        }
        Ok(Self { poses })
    }

    /// Poses stamped with their index as time.
    pub fn from_poses(poses: impl IntoIterator<Item = Se3<T>>) -> Self {
        let poses = poses
            .into_iter()
            .enumerate()
            .map(|(i, pose)| Stamped {
                time: crate::scalar::lit(i as f64),
                pose,
            })
            .collect();
        Self { poses }
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn poses(&self) -> &[Stamped<T>] {
        &self.poses
    }

    pub fn iter(&self) -> impl Iterator<Item = &Stamped<T>> {
        self.poses.iter()
    }

    pub fn positions(&self) -> Vec<Vector3<T>> {
        self.poses.iter().map(|s| s.pose.translation).collect()
    }

    pub fn length(&self) -> Result<T, EvalError> {
        traj_length(self)
    }

    /// Same timestamps, poses replaced by `f(pose)`.
    pub fn map_poses(&self, f: impl Fn(&Se3<T>) -> Se3<T>) -> Self {
        Self {
            poses: self
                .poses
                .iter()
                .map(|s| Stamped {
                    time: s.time,
                    pose: f(&s.pose),
                })
                .collect(),
        }
    }

    /// Translations multiplied by `factor`, rotations untouched.
    pub fn scaled(&self, factor: T) -> Self {
        self.map_poses(|p| Se3::new(p.rotation, p.translation * factor))
    }
}

/// Sum of distances between consecutive positions.
pub fn traj_length<T: Real>(traj: &Trajectory<T>) -> Result<T, EvalError> {
    if traj.len() < 2 {
        return Err(EvalError::TooShort {
            needed: 2,
            actual: traj.len(),
        });
    }
    Ok(traj.poses.windows(2).fold(T::zero(), |acc, w| {
        acc + (w[1].pose.translation - w[0].pose.translation).norm()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(x: f64, y: f64) -> Se3<f64> {
        Se3::from_translation(Vector3::new(x, y, 0.0))
    }

    #[test]
    fn two_poses_one_metre() {
        let t = Trajectory::from_poses([at(0.0, 0.0), at(1.0, 0.0)]);
        assert_eq!(traj_length(&t).unwrap(), 1.0);
    }

    #[test]
    fn closed_square() {
        let t = Trajectory::from_poses([
            at(0.0, 0.0),
            at(10.0, 0.0),
            at(10.0, 10.0),
            at(0.0, 10.0),
            at(0.0, 0.0),
        ]);
        assert_eq!(traj_length(&t).unwrap(), 40.0);
    }

    #[test]
    fn single_pose_is_too_short() {
        let t = Trajectory::from_poses([at(0.0, 0.0)]);
        assert_eq!(
            traj_length(&t),
            Err(EvalError::TooShort {
                needed: 2,
                actual: 1
            })
        );
    }

    #[test]
    fn rejects_repeated_timestamp() {
        let s = |time| Stamped {
            time,
            pose: Se3::<f64>::identity(),
        };
        assert_eq!(
            Trajectory::new(vec![s(0.0), s(1.0), s(1.0)]),
            Err(EvalError::NonMonotonicTime { index: 2 })
        );
    }
}
