use nalgebra::{Matrix3, Vector3};

use super::metrics::{associate, default_tolerance};
use super::{EvalError, Trajectory};
use crate::geometry::Similarity;
use crate::scalar::{lit, Real};

/// Least-squares similarity (or rigid, when `with_scale` is false) transform
/// mapping `src` onto `dst`, minimizing `Σ‖dst_i − (s·R·src_i + t)‖²`.
pub fn umeyama<T: Real>(
    src: &[Vector3<T>],
    dst: &[Vector3<T>],
    with_scale: bool,
) -> Result<Similarity<T>, EvalError> {
    if src.len() != dst.len() {
        return Err(EvalError::LengthMismatch(src.len(), dst.len()));
    }
    let n = src.len();
    if n < 3 {
        return Err(EvalError::Degenerate("fewer than three correspondences"));
    }
    let inv_n = T::one() / lit(n as f64);
    let mean = |pts: &[Vector3<T>]| pts.iter().fold(Vector3::zeros(), |a, p| a + p) * inv_n;
    let mu_src = mean(src);
    let mu_dst = mean(dst);

    let mut cov = Matrix3::zeros();
    let mut scatter = Matrix3::zeros();
    let mut var_src = T::zero();
    for (s, d) in src.iter().zip(dst) {
        let sc = s - mu_src;
        let dc = d - mu_dst;
        cov += dc * sc.transpose();
        scatter += sc * sc.transpose();
        var_src += sc.norm_squared();
    }
    cov *= inv_n;
    var_src *= inv_n;

    // Collinear (or coincident) sources leave the rotation about the line free.
    let spread = scatter.symmetric_eigenvalues();
    let mut ev = [spread[0], spread[1], spread[2]];
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let tol = T::default_epsilon().sqrt();
    if !(ev[0] > T::zero()) || ev[1] <= tol * ev[0] {
        return Err(EvalError::Degenerate("source points are collinear"));
    }

    let svd = cov.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(EvalError::Degenerate("SVD did not converge")),
    };
    let d = svd.singular_values;
    let mut sign = Vector3::repeat(T::one());
    if u.determinant() * v_t.determinant() < T::zero() {
        let (min_idx, _) =
            d.iter().enumerate().fold(
                (0, d[0]),
                |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) },
            );
        sign[min_idx] = -T::one();
    }
    let rotation = u * Matrix3::from_diagonal(&sign) * v_t;
    let scale = if with_scale {
        d.component_mul(&sign).sum() / var_src
    } else {
        T::one()
    };
    let translation = mu_dst - rotation * mu_src * scale;
    Ok(Similarity {
        rotation,
        translation,
        scale,
    })
}

/// Aligns `est` onto `gt` after nearest-timestamp association.
pub fn umeyama_align<T: Real>(
    est: &Trajectory<T>,
    gt: &Trajectory<T>,
    with_scale: bool,
) -> Result<Similarity<T>, EvalError> {
    let assoc = associate(est, gt, default_tolerance(gt))?;
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
    umeyama(&src, &dst, with_scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Se3;

    fn cloud() -> Vec<Vector3<f64>> {
        vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 2.0, 0.0),
            Vector3::new(0.5, 0.5, 1.5),
            Vector3::new(-1.0, 0.3, 0.2),
        ]
    }

    #[test]
    fn identity_when_equal() {
        let p = cloud();
        let sim = umeyama(&p, &p, true).unwrap();
        assert!((sim.rotation - Matrix3::identity()).norm() < 1e-12);
        assert!(sim.translation.norm() < 1e-12);
        assert!((sim.scale - 1.0).abs() < 1e-12);
    }

    #[test]
    fn recovers_half_scale() {
        let gt = cloud();
        let est: Vec<_> = gt.iter().map(|p| p * 2.0).collect();
        let sim = umeyama(&est, &gt, true).unwrap();
        assert!((sim.scale - 0.5).abs() < 1e-12);
        for (e, g) in est.iter().zip(&gt) {
            assert!((sim.apply_point(e) - g).norm() < 1e-9);
        }
    }

    #[test]
    fn collinear_is_degenerate() {
        let line: Vec<_> = (0..5).map(|i| Vector3::new(i as f64, 0.0, 0.0)).collect();
        assert!(matches!(
            umeyama(&line, &line, false),
            Err(EvalError::Degenerate(_))
        ));
    }

    #[test]
    fn needs_three_points() {
        let p = &cloud()[..2];
        assert!(umeyama(p, p, false).is_err());
    }

    #[test]
    fn planar_reflection_is_not_returned() {
        // Coplanar points admit a reflection with zero residual; the
        // determinant fix must still return a proper rotation.
        let src: Vec<_> = cloud()
            .iter()
            .map(|p| Vector3::new(p.x, p.y, 0.0))
            .collect();
        let r = Se3::from_yaw(0.4, Vector3::new(1.0, 2.0, 3.0));
        let dst: Vec<_> = src.iter().map(|p| r.transform_point(p)).collect();
        let sim = umeyama(&src, &dst, false).unwrap();
        assert!((sim.rotation.determinant() - 1.0).abs() < 1e-12);
        assert!((sim.rotation - r.rotation).norm() < 1e-9);
    }

    #[test]
    fn works_in_f32() {
        let gt: Vec<Vector3<f32>> = cloud().iter().map(|p| p.cast()).collect();
        let est: Vec<_> = gt.iter().map(|p| p + Vector3::new(1.0, 0.0, 0.0)).collect();
        let sim = umeyama(&est, &gt, false).unwrap();
        assert!((sim.translation - Vector3::new(-1.0, 0.0, 0.0)).norm() < 1e-4);
    }
}
