//! Deterministic z-buffer rasterizer for a distortion-free pinhole camera.

use nalgebra::{Matrix3, Vector3};

use crate::depth::DepthConversionProfile;
use crate::sim::scene::{Beacon, Triangle, BACKGROUND_ID, BEACON_FLAG};
use crate::Pose;

pub const SKY: [u8; 3] = [150, 190, 230];

/// Pinhole camera with clip planes, posed camera-to-world.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinholeCamera {
    pub pose: Pose,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub near: f64,
    pub far: f64,
    pub width: usize,
    pub height: usize,
}

impl PinholeCamera {
    pub fn project(&self, p_cam: &Vector3<f64>) -> (f64, f64) {
        (
            self.fx * p_cam.x / p_cam.z + self.cx,
            self.fy * p_cam.y / p_cam.z + self.cy,
        )
    }
}

pub struct RasterOutput {
    pub rgb: Vec<u8>,
    pub ndc: Vec<f64>,
    pub ids: Vec<u32>,
}

#[derive(Clone, Copy)]
struct Projected {
    u: f64,
    v: f64,
    inv_z: f64,
}

struct Target<'a> {
    cam: &'a PinholeCamera,
    z: Vec<f64>,
    rgb: Vec<u8>,
    ids: Vec<u32>,
}

impl Target<'_> {
    #[inline]
    fn write(&mut self, idx: usize, z: f64, color: [u8; 3], id: u32) {
        if z < self.z[idx] {
            self.z[idx] = z;
            self.ids[idx] = id;
            self.rgb[3 * idx..3 * idx + 3].copy_from_slice(&color);
        }
    }

    fn fill_triangle(&mut self, p: [Projected; 3], color: [u8; 3], id: u32) {
        let edge = |a: &Projected, b: &Projected, x: f64, y: f64| {
            (b.u - a.u) * (y - a.v) - (b.v - a.v) * (x - a.u)
        };
        let area = edge(&p[0], &p[1], p[2].u, p[2].v);
        if area.abs() < 1e-12 {
            return;
        }
        let (w, h) = (self.cam.width as f64, self.cam.height as f64);
        let min_u = p.iter().map(|q| q.u).fold(f64::INFINITY, f64::min).max(0.0);
        let max_u = p
            .iter()
            .map(|q| q.u)
            .fold(f64::NEG_INFINITY, f64::max)
            .min(w);
        let min_v = p.iter().map(|q| q.v).fold(f64::INFINITY, f64::min).max(0.0);
        let max_v = p
            .iter()
            .map(|q| q.v)
            .fold(f64::NEG_INFINITY, f64::max)
            .min(h);
        if min_u >= max_u || min_v >= max_v {
            return;
        }
        let i0 = (min_u - 0.5).ceil().max(0.0) as usize;
        let i1 = ((max_u - 0.5).floor() as isize).min(self.cam.width as isize - 1);
        let j0 = (min_v - 0.5).ceil().max(0.0) as usize;
        let j1 = ((max_v - 0.5).floor() as isize).min(self.cam.height as isize - 1);
        if i1 < i0 as isize || j1 < j0 as isize {
            return;
        }
        let inv_area = 1.0 / area;
        for j in j0..=j1 as usize {
            let y = j as f64 + 0.5;
            for i in i0..=i1 as usize {
                let x = i as f64 + 0.5;
                let b0 = edge(&p[1], &p[2], x, y) * inv_area;
                let b1 = edge(&p[2], &p[0], x, y) * inv_area;
                let b2 = edge(&p[0], &p[1], x, y) * inv_area;
                if b0 < 0.0 || b1 < 0.0 || b2 < 0.0 {
                    continue;
                }
                let inv_z = b0 * p[0].inv_z + b1 * p[1].inv_z + b2 * p[2].inv_z;
                let z = 1.0 / inv_z;
                if z < self.cam.near || z >= self.cam.far {
                    continue;
                }
                self.write(j * self.cam.width + i, z, color, id);
            }
        }
    }

    fn fill_sprite(&mut self, u: f64, v: f64, radius: f64, z: f64, color: [u8; 3], id: u32) {
        let i0 = (u - radius - 0.5).ceil().max(0.0) as isize;
        let i1 = ((u + radius - 0.5).floor() as isize).min(self.cam.width as isize - 1);
        let j0 = (v - radius - 0.5).ceil().max(0.0) as isize;
        let j1 = ((v + radius - 0.5).floor() as isize).min(self.cam.height as isize - 1);
        let r2 = radius * radius;
        for j in j0..=j1 {
            let dy = j as f64 + 0.5 - v;
            for i in i0..=i1 {
                let dx = i as f64 + 0.5 - u;
                if dx * dx + dy * dy <= r2 {
                    self.write(j as usize * self.cam.width + i as usize, z, color, id);
                }
            }
        }
    }
}

/// Signed distance to one side plane of the view frustum.
type PlaneFn = fn(&Vector3<f64>, f64, f64) -> f64;

fn outside_same_plane(pts: &[Vector3<f64>; 3], tan_x: f64, tan_y: f64) -> bool {
    let planes: [PlaneFn; 4] = [
        |p, tx, _| p.x - p.z * tx,
        |p, tx, _| -p.x - p.z * tx,
        |p, _, ty| p.y - p.z * ty,
        |p, _, ty| -p.y - p.z * ty,
    ];
    planes
        .iter()
        .any(|f| pts.iter().all(|p| f(p, tan_x, tan_y) > 0.0))
}

/// Clips a camera-space triangle against `z >= near`.
fn clip_near(pts: [Vector3<f64>; 3], near: f64) -> Vec<Vector3<f64>> {
    let mut out = Vec::with_capacity(4);
    for k in 0..3 {
        let a = pts[k];
        let b = pts[(k + 1) % 3];
        let a_in = a.z >= near;
        let b_in = b.z >= near;
        if a_in {
            out.push(a);
        }
        if a_in != b_in {
            let t = (near - a.z) / (b.z - a.z);
            let mut q = a + (b - a) * t;
            q.z = near;
            out.push(q);
        }
    }
    out
}

/// Renders `triangles` and `beacons` from `cam`, writing NDC through the
/// sim-native forward mapping. Uncovered pixels hold NDC `1`.
pub fn rasterize<'t>(
    cam: &PinholeCamera,
    triangles: impl IntoIterator<Item = &'t Triangle>,
    beacons: &[Beacon],
    profile: &DepthConversionProfile<f64>,
) -> RasterOutput {
    let n = cam.width * cam.height;
    let mut target = Target {
        cam,
        z: vec![f64::INFINITY; n],
        rgb: SKY.repeat(n),
        ids: vec![BACKGROUND_ID; n],
    };
    let world_to_cam: Matrix3<f64> = cam.pose.rotation.transpose();
    let origin = cam.pose.translation;
    let to_cam = |p: &Vector3<f64>| world_to_cam * (p - origin);
    let tan_x = (cam.width as f64 * 0.5) / cam.fx;
    let tan_y = (cam.height as f64 * 0.5) / cam.fy;

    for tri in triangles {
        let pts = tri.vertices.map(|v| to_cam(&v));
        if pts.iter().all(|p| p.z < cam.near) || pts.iter().all(|p| p.z >= cam.far) {
            continue;
        }
        if outside_same_plane(&pts, tan_x, tan_y) {
            continue;
        }
        let poly = clip_near(pts, cam.near);
        if poly.len() < 3 {
            continue;
        }
        let proj: Vec<Projected> = poly
            .iter()
            .map(|p| {
                let (u, v) = cam.project(p);
                Projected {
                    u,
                    v,
                    inv_z: 1.0 / p.z,
                }
            })
            .collect();
        for k in 1..proj.len() - 1 {
            target.fill_triangle([proj[0], proj[k], proj[k + 1]], tri.color, tri.id);
        }
    }

    for b in beacons {
        let p = to_cam(&b.position);
        if p.z <= cam.near || p.z >= cam.far {
            continue;
        }
        let (u, v) = cam.project(&p);
        let radius = (cam.fx * b.radius / p.z).max(0.75);
        if u + radius < 0.0
            || v + radius < 0.0
            || u - radius > cam.width as f64
            || v - radius > cam.height as f64
        {
            continue;
        }
        target.fill_sprite(u, v, radius, p.z, b.color, BEACON_FLAG | b.id);
    }

    let ndc = target
        .z
        .iter()
        .map(|&z| {
            if z.is_finite() {
                profile.planar_to_ndc(z)
            } else {
                1.0
            }
        })
        .collect();
    RasterOutput {
        rgb: target.rgb,
        ndc,
        ids: target.ids,
    }
}
