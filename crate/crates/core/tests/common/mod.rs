//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::{Matrix3, Matrix4, SymmetricEigen, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use tefs_core::geometry::Se3;
use tefs_core::scenario::ScenarioConfig;
use tefs_core::traj_eval::Stamped;
use tefs_core::{Pose, Trajectory};

pub fn scenario(name: &str) -> ScenarioConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name);
    ScenarioConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Uniform random rotation from a random unit quaternion.
pub fn random_rotation(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    loop {
        let q = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let n: f64 = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.1 && n <= 1.0 {
            return quat_to_matrix([q[0] / n, q[1] / n, q[2] / n, q[3] / n]);
        }
    }
}

/// `[w, x, y, z]` unit quaternion to rotation matrix.
pub fn quat_to_matrix(q: [f64; 4]) -> Matrix3<f64> {
    let [w, x, y, z] = q;
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Closed-form absolute orientation with unit quaternions. Returns
/// `(R, t, s)` minimizing `Σ‖d − (s R p + t)‖²`.
pub fn horn(
    src: &[Vector3<f64>],
    dst: &[Vector3<f64>],
    with_scale: bool,
) -> (Matrix3<f64>, Vector3<f64>, f64) {
    let n = src.len() as f64;
    let cs = src.iter().sum::<Vector3<f64>>() / n;
    let cd = dst.iter().sum::<Vector3<f64>>() / n;
    let mut m = Matrix3::zeros();
    for (p, d) in src.iter().zip(dst) {
        m += (p - cs) * (d - cd).transpose();
    }
    let (sxx, sxy, sxz) = (m[(0, 0)], m[(0, 1)], m[(0, 2)]);
    let (syx, syy, syz) = (m[(1, 0)], m[(1, 1)], m[(1, 2)]);
    let (szx, szy, szz) = (m[(2, 0)], m[(2, 1)], m[(2, 2)]);
    let k = Matrix4::new(
        sxx + syy + szz,
        syz - szy,
        szx - sxz,
        sxy - syx,
        syz - szy,
        sxx - syy - szz,
        sxy + syx,
        szx + sxz,
        szx - sxz,
        sxy + syx,
        -sxx + syy - szz,
        syz + szy,
        sxy - syx,
        szx + sxz,
        syz + szy,
        -sxx - syy + szz,
    );
    let eig = SymmetricEigen::new(k);
    let best = (0..4)
        .max_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap())
        .unwrap();
    let v = eig.eigenvectors.column(best);
    let r = quat_to_matrix([v[0], v[1], v[2], v[3]]);
    let s = if with_scale {
        let num: f64 = src
            .iter()
            .zip(dst)
            .map(|(p, d)| (d - cd).dot(&(r * (p - cs))))
            .sum();
        let den: f64 = src.iter().map(|p| (p - cs).norm_squared()).sum();
        num / den
    } else {
        1.0
    };
    (r, cd - r * cs * s, s)
}

/// Straight-line reference statistics: (mean, median, rmse, max).
pub fn stats(errors: &[f64]) -> (f64, f64, f64, f64) {
    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    let rmse = (errors.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
    let max = errors.iter().cloned().fold(0.0, f64::max);
    let mut s = errors.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if s.len().is_multiple_of(2) {
        0.5 * (s[s.len() / 2 - 1] + s[s.len() / 2])
    } else {
        s[s.len() / 2]
    };
    (mean, median, rmse, max)
}

/// Nearest-time matching by exhaustive search, one-to-one and in order.
pub fn brute_associate(est: &[Stamped<f64>], gt: &[Stamped<f64>], tol: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut last: Option<usize> = None;
    for (i, e) in est.iter().enumerate() {
        let mut best = 0;
        for j in 1..gt.len() {
            if (gt[j].time - e.time).abs() < (gt[best].time - e.time).abs() {
                best = j;
            }
        }
        if (gt[best].time - e.time).abs() <= tol && last.is_none_or(|l| best > l) {
            out.push((i, best));
            last = Some(best);
        }
    }
    out
}

pub fn median_half_interval(gt: &[Stamped<f64>]) -> f64 {
    let mut d: Vec<f64> = gt.windows(2).map(|w| w[1].time - w[0].time).collect();
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    d[d.len() / 2] / 2.0
}

pub fn path_length(gt: &[Stamped<f64>]) -> f64 {
    gt.windows(2)
        .map(|w| (w[1].pose.translation - w[0].pose.translation).norm())
        .sum()
}

/// Reference APE translation errors after optional Horn alignment.
pub fn brute_ape(est: &Trajectory, gt: &Trajectory, align: Option<bool>) -> Vec<f64> {
    let (e, g) = (est.poses(), gt.poses());
    let pairs = brute_associate(e, g, median_half_interval(g));
    let src: Vec<_> = pairs.iter().map(|&(i, _)| e[i].pose.translation).collect();
    let dst: Vec<_> = pairs.iter().map(|&(_, j)| g[j].pose.translation).collect();
    let (r, t, s) = match align {
        None => (Matrix3::identity(), Vector3::zeros(), 1.0),
        Some(scale) => horn(&src, &dst, scale),
    };
    src.iter()
        .zip(&dst)
        .map(|(p, d)| (r * p * s + t - d).norm())
        .collect()
}

fn rotation_deg(r: &Matrix3<f64>) -> f64 {
    let c = ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    c.acos().to_degrees()
}

/// Reference RPE (translation m, rotation deg) over associated frames
/// `delta` apart.
pub fn brute_rpe(est: &Trajectory, gt: &Trajectory, delta: usize) -> (Vec<f64>, Vec<f64>) {
    let (e, g) = (est.poses(), gt.poses());
    let pairs = brute_associate(e, g, median_half_interval(g));
    let rel = |a: &Pose, b: &Pose| -> (Matrix3<f64>, Vector3<f64>) {
        let ra = a.rotation.transpose();
        (ra * b.rotation, ra * (b.translation - a.translation))
    };
    let mut trans = Vec::new();
    let mut rot = Vec::new();
    for k in 0..pairs.len() - delta {
        let (ei, gi) = pairs[k];
        let (ej, gj) = pairs[k + delta];
        let (rq, tq) = rel(&g[gi].pose, &g[gj].pose);
        let (rp, tp) = rel(&e[ei].pose, &e[ej].pose);
        let re = rq.transpose() * rp;
        let te = rq.transpose() * (tp - tq);
        trans.push(te.norm());
        rot.push(rotation_deg(&re));
    }
    (trans, rot)
}

/// Smooth random ground truth and a perturbed, jittered estimate.
pub fn random_pair(rng: &mut ChaCha8Rng, n: usize) -> (Trajectory, Trajectory) {
    let mut gt = Vec::with_capacity(n);
    let mut est = Vec::with_capacity(n);
    let mut pose = Pose::identity();
    let mut drift = Pose::identity();
    for k in 0..n {
        let step = Se3::from_axis_angle(
            Vector3::new(
                rng.random_range(-0.1..0.1),
                rng.random_range(-0.1..0.1),
                1.0,
            ),
            rng.random_range(-0.2..0.2),
            Vector3::new(
                rng.random_range(0.5..1.5),
                rng.random_range(-0.2..0.2),
                rng.random_range(-0.05..0.05),
            ),
        );
        pose = pose * step;
        let wobble = Se3::from_axis_angle(
            Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(0.1..1.0),
            ),
            rng.random_range(-0.01..0.01),
            Vector3::new(
                rng.random_range(-0.05..0.05),
                rng.random_range(-0.05..0.05),
                rng.random_range(-0.05..0.05),
            ),
        );
        drift = drift * wobble;
        let t = k as f64 * 0.1;
        gt.push(Stamped { time: t, pose });
        if rng.random_bool(0.9) {
            est.push(Stamped {
                time: t + rng.random_range(-0.02..0.02),
                pose: drift * pose,
            });
        }
    }
    (Trajectory::new(est).unwrap(), Trajectory::new(gt).unwrap())
}
