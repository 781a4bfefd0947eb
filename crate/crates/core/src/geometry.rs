//! Rigid and similarity transforms.

use std::ops::Mul;

use nalgebra::{Matrix3, Vector3};

use crate::scalar::{lit, to_f64, Real};

/// Rigid transform in SE(3), stored as a rotation matrix and a translation.
///
/// Poses follow the "camera/body to world" convention: `transform_point`
/// maps a point expressed in the local frame into the parent frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Se3<T: Real> {
    pub rotation: Matrix3<T>,
    pub translation: Vector3<T>,
}

impl<T: Real> Default for Se3<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Real> Se3<T> {
    pub fn new(rotation: Matrix3<T>, translation: Vector3<T>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::new(Matrix3::identity(), Vector3::zeros())
    }

    pub fn from_translation(translation: Vector3<T>) -> Self {
        Self::new(Matrix3::identity(), translation)
    }

    /// Rotation of `yaw` radians about +z, followed by `translation`.
    pub fn from_yaw(yaw: T, translation: Vector3<T>) -> Self {
        let (s, c) = (yaw.sin(), yaw.cos());
        let rotation = Matrix3::new(
            c,
            -s,
            T::zero(),
            s,
            c,
            T::zero(),
            T::zero(),
            T::zero(),
            T::one(),
        );
        Self::new(rotation, translation)
    }

    /// Rotation about a unit `axis` by `angle` radians (Rodrigues).
    pub fn from_axis_angle(axis: Vector3<T>, angle: T, translation: Vector3<T>) -> Self {
        let k = axis.normalize();
        let skew = Matrix3::new(
            T::zero(),
            -k.z,
            k.y,
            k.z,
            T::zero(),
            -k.x,
            -k.y,
            k.x,
            T::zero(),
        );
        let rotation =
            Matrix3::identity() + skew * angle.sin() + skew * skew * (T::one() - angle.cos());
        Self::new(rotation, translation)
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self::new(rt, -(rt * self.translation))
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn transform_point(&self, p: &Vector3<T>) -> Vector3<T> {
        self.rotation * p + self.translation
    }

    /// Maps a parent-frame point into this pose's local frame.
    pub fn inverse_transform_point(&self, p: &Vector3<T>) -> Vector3<T> {
        self.rotation.transpose() * (p - self.translation)
    }

    /// Rotation angle in radians, in `[0, pi]`.
    pub fn rotation_angle(&self) -> T {
        let r = &self.rotation;
        let half = lit::<T>(0.5);
        let cos = (r.trace() - T::one()) * half;
        let sin = Vector3::new(
            r[(2, 1)] - r[(1, 2)],
            r[(0, 2)] - r[(2, 0)],
            r[(1, 0)] - r[(0, 1)],
        )
        .norm()
            * half;
        sin.atan2(cos)
    }

    /// Orthonormality residuals: `(max |R Rᵀ - I|, |det R - 1|)`.
    pub fn rotation_residual(&self) -> (T, T) {
        let gram = self.rotation * self.rotation.transpose() - Matrix3::identity();
        let ortho = gram.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
        (ortho, (self.rotation.determinant() - T::one()).abs())
    }

    pub fn is_rotation_valid(&self, tol: T) -> bool {
        let (ortho, det) = self.rotation_residual();
        ortho <= tol && det <= tol
    }

    pub fn cast<U: Real>(&self) -> Se3<U> {
        Se3::new(
            self.rotation.map(|v| lit(to_f64(v))),
            self.translation.map(|v| lit(to_f64(v))),
        )
    }
}

impl<T: Real> Mul for Se3<T> {
    type Output = Se3<T>;

    fn mul(self, rhs: Self) -> Self::Output {
        self.compose(&rhs)
    }
}

impl<'a, T: Real> Mul<&'a Se3<T>> for &'a Se3<T> {
    type Output = Se3<T>;

    fn mul(self, rhs: &'a Se3<T>) -> Self::Output {
        self.compose(rhs)
    }
}

/// Similarity transform `x ↦ s·R·x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity<T: Real> {
    pub rotation: Matrix3<T>,
    pub translation: Vector3<T>,
    pub scale: T,
}

impl<T: Real> Similarity<T> {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            scale: T::one(),
        }
    }

    pub fn apply_point(&self, p: &Vector3<T>) -> Vector3<T> {
        self.rotation * p * self.scale + self.translation
    }

    /// Applies the transform to a pose: rotation is left-multiplied and
    /// the position mapped as a point.
    pub fn apply_pose(&self, pose: &Se3<T>) -> Se3<T> {
        Se3::new(
            self.rotation * pose.rotation,
            self.apply_point(&pose.translation),
        )
    }

    pub fn rigid(&self) -> Se3<T> {
        Se3::new(self.rotation, self.translation)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn inverse_composes_to_identity() {
        let p = Se3::from_axis_angle(
            Vector3::new(1.0, 2.0, 0.5),
            0.7,
            Vector3::new(3.0, -1.0, 2.0),
        );
        let id = p.compose(&p.inverse());
        assert_relative_eq!(id.rotation, Matrix3::identity(), epsilon = 1e-12);
        assert_relative_eq!(id.translation, Vector3::zeros(), epsilon = 1e-12);
    }

    #[test]
    fn yaw_rotates_x_into_y() {
        let p = Se3::from_yaw(FRAC_PI_2, Vector3::zeros());
        let q = p.transform_point(&Vector3::new(1.0, 0.0, 0.0));
        assert_relative_eq!(q, Vector3::new(0.0, 1.0, 0.0), epsilon = 1e-15);
        assert!(p.is_rotation_valid(1e-12));
        assert_relative_eq!(p.rotation_angle(), FRAC_PI_2, epsilon = 1e-12);
    }

    #[test]
    fn f32_poses_work() {
        let p: Se3<f32> = Se3::from_yaw(0.3, Vector3::new(1.0, 0.0, 0.0));
        let back = p.inverse_transform_point(&p.transform_point(&Vector3::new(0.5, 0.25, 1.0)));
        assert!((back - Vector3::new(0.5, 0.25, 1.0)).norm() < 1e-6);
    }
}
