//! Procedural scene: ground, road, buildings, feature beacons, scripted
//! traffic and hard-coded animated props.

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::path::Path;

/// Object-id raster value for background pixels.
pub const BACKGROUND_ID: u32 = 0;
/// High bit marking beacon ids in the object-id raster.
pub const BEACON_FLAG: u32 = 0x8000_0000;

const GROUND_ID: u32 = 1;
const ROAD_ID: u32 = 2;
const BUILDING_BASE: u32 = 1_000;
const TRAFFIC_BASE: u32 = 100_000;
const ANIMATED_BASE: u32 = 200_000;
/// Scenery beyond the end of an open path, metres.
const RUNOUT: f64 = 40.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    /// Path distance between consecutive beacons (sides alternate).
    pub beacon_spacing: f64,
    pub beacon_lateral: [f64; 2],
    pub beacon_height: [f64; 2],
    pub beacon_radius: f64,
    pub building_spacing: f64,
    pub traffic: usize,
    pub traffic_speed_kmh: f64,
    pub animated: usize,
    /// Spin rate of hard-coded props, rad/s.
    pub animated_rate: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            beacon_spacing: 0.6,
            beacon_lateral: [3.0, 11.0],
            beacon_height: [0.2, 3.5],
            beacon_radius: 0.12,
            building_spacing: 10.0,
            traffic: 2,
            traffic_speed_kmh: 30.0,
            animated: 4,
            animated_rate: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub vertices: [Vector3<f64>; 3],
    pub color: [u8; 3],
    pub id: u32,
}

/// A uniquely identified point feature, rendered as a camera-facing sprite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Beacon {
    pub id: u32,
    pub position: Vector3<f64>,
    pub radius: f64,
    pub color: [u8; 3],
}

/// How an object responds to the engine clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MotionKind {
    Static,
    /// Driven by in-game time; frozen when the time scale is zero.
    Scripted,
    /// Advances a fixed step every unpaused tick regardless of time scale.
    HardCoded,
}

/// Box moving along the path at constant speed (opposite lane).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficBox {
    pub id: u32,
    pub start_s: f64,
    pub speed: f64,
    pub lateral: f64,
    pub size: Vector3<f64>,
    pub color: [u8; 3],
}

/// Spinning prop whose phase ignores the time scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnimatedProp {
    pub id: u32,
    pub center: Vector3<f64>,
    pub size: Vector3<f64>,
    pub rate: f64,
    pub color: [u8; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub path: Path,
    pub statics: Vec<Triangle>,
    pub beacons: Vec<Beacon>,
    pub traffic: Vec<TrafficBox>,
    pub animated: Vec<AnimatedProp>,
}

impl Scene {
    pub fn empty(path: Path) -> Self {
        Self {
            path,
            statics: Vec::new(),
            beacons: Vec::new(),
            traffic: Vec::new(),
            animated: Vec::new(),
        }
    }

    pub fn generate(path: Path, spec: &SceneSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut scene = Self::empty(path);
        let len = scene.path.length();
        // Open paths get scenery past the end so the last frames still see
        // something ahead.
        let dressed = if scene.path.is_closed() {
            len
        } else {
            len + RUNOUT
        };
        scene.add_ground(dressed);

        if spec.beacon_spacing > 0.0 {
            let count = (dressed / spec.beacon_spacing).floor() as usize;
            for k in 0..count {
                let s = (k as f64 + 0.5) * spec.beacon_spacing;
                let side = if k % 2 == 0 { 1.0 } else { -1.0 };
                let lateral =
                    side * rng.random_range(spec.beacon_lateral[0]..=spec.beacon_lateral[1]);
                let height = rng.random_range(spec.beacon_height[0]..=spec.beacon_height[1]);
                let p = scene.dressing_point(s).offset(lateral);
                scene.beacons.push(Beacon {
                    id: k as u32 + 1,
                    position: Vector3::new(p.x, p.y, height),
                    radius: spec.beacon_radius,
                    color: beacon_color(&mut rng),
                });
            }
        }

        if spec.building_spacing > 0.0 {
            let count = (dressed / spec.building_spacing).floor() as usize;
            let mut next_id = BUILDING_BASE;
            for k in 0..count {
                for side in [1.0, -1.0] {
                    if rng.random::<f64>() > 0.7 {
                        continue;
                    }
                    let s = (k as f64 + 0.5) * spec.building_spacing;
                    let at = scene.dressing_point(s);
                    let lateral = side * rng.random_range(16.0..22.0);
                    let c = at.offset(lateral);
                    let size = Vector3::new(
                        rng.random_range(5.0..8.0),
                        rng.random_range(5.0..8.0),
                        rng.random_range(4.0..15.0),
                    );
                    let color = surface_color(&mut rng);
                    scene.statics.extend(box_triangles(
                        Vector3::new(c.x, c.y, size.z * 0.5),
                        at.heading,
                        size,
                        color,
                        next_id,
                    ));
                    next_id += 1;
                }
            }
        }

        for k in 0..spec.traffic {
            scene.traffic.push(TrafficBox {
                id: TRAFFIC_BASE + k as u32,
                start_s: len * (k as f64 + 0.5) / spec.traffic as f64,
                speed: spec.traffic_speed_kmh / 3.6,
                lateral: 1.8,
                size: Vector3::new(4.2, 1.8, 1.5),
                color: surface_color(&mut rng),
            });
        }

        for k in 0..spec.animated {
            let s = len * (k as f64 + 0.3) / spec.animated.max(1) as f64;
            let side = if k % 2 == 0 { -1.0 } else { 1.0 };
            let p = scene.path.point_wrapped(s).offset(side * 13.0);
            scene.animated.push(AnimatedProp {
                id: ANIMATED_BASE + k as u32,
                center: Vector3::new(p.x, p.y, 3.0),
                size: Vector3::new(2.4, 0.2, 1.2),
                rate: spec.animated_rate,
                color: surface_color(&mut rng),
            });
        }
        scene
    }

    fn dressing_point(&self, s: f64) -> super::PathPoint {
        if self.path.is_closed() {
            self.path.point_wrapped(s)
        } else {
            self.path.point_extended(s)
        }
    }

    fn add_ground(&mut self, len: f64) {
        let step = 4.0;
        let mut lo = Vector2::repeat(f64::INFINITY);
        let mut hi = Vector2::repeat(f64::NEG_INFINITY);
        let tiles = (len / step).ceil().max(1.0) as usize;
        for k in 0..tiles {
            let a = self.dressing_point(k as f64 * step);
            let b = self.dressing_point(((k + 1) as f64 * step).min(len));
            let corners = [a.offset(-3.5), a.offset(3.5), b.offset(3.5), b.offset(-3.5)];
            for c in &corners {
                lo = lo.inf(c);
                hi = hi.sup(c);
            }
            let v = corners.map(|c| Vector3::new(c.x, c.y, 0.0));
            let color = if k % 2 == 0 {
                [112, 112, 118]
            } else {
                [104, 104, 110]
            };
            self.statics.extend(quad(v, color, ROAD_ID));
        }
        let margin = 200.0;
        let g = [
            Vector3::new(lo.x - margin, lo.y - margin, -0.02),
            Vector3::new(hi.x + margin, lo.y - margin, -0.02),
            Vector3::new(hi.x + margin, hi.y + margin, -0.02),
            Vector3::new(lo.x - margin, hi.y + margin, -0.02),
        ];
        self.statics.extend(quad(g, [96, 132, 84], GROUND_ID));
    }
}

fn beacon_color(rng: &mut ChaCha8Rng) -> [u8; 3] {
    [
        rng.random_range(160..=255),
        rng.random_range(96..=255),
        rng.random_range(96..=255),
    ]
}

fn surface_color(rng: &mut ChaCha8Rng) -> [u8; 3] {
    [
        rng.random_range(90..=230),
        rng.random_range(90..=230),
        rng.random_range(90..=230),
    ]
}

fn shade(color: [u8; 3], factor: f64) -> [u8; 3] {
    color.map(|c| (c as f64 * factor).round().clamp(0.0, 255.0) as u8)
}

fn quad(v: [Vector3<f64>; 4], color: [u8; 3], id: u32) -> [Triangle; 2] {
    [
        Triangle {
            vertices: [v[0], v[1], v[2]],
            color,
            id,
        },
        Triangle {
            vertices: [v[0], v[2], v[3]],
            color,
            id,
        },
    ]
}

/// Oriented box with per-face shading: top brightest, sides darker.
pub fn box_triangles(
    center: Vector3<f64>,
    yaw: f64,
    size: Vector3<f64>,
    color: [u8; 3],
    id: u32,
) -> Vec<Triangle> {
    let (s, c) = yaw.sin_cos();
    let h = size * 0.5;
    let corner = |x: f64, y: f64, z: f64| {
        Vector3::new(
            center.x + c * x * h.x - s * y * h.y,
            center.y + s * x * h.x + c * y * h.y,
            center.z + z * h.z,
        )
    };
    let p = [
        corner(-1.0, -1.0, -1.0),
        corner(1.0, -1.0, -1.0),
        corner(1.0, 1.0, -1.0),
        corner(-1.0, 1.0, -1.0),
        corner(-1.0, -1.0, 1.0),
        corner(1.0, -1.0, 1.0),
        corner(1.0, 1.0, 1.0),
        corner(-1.0, 1.0, 1.0),
    ];
    let faces: [([usize; 4], f64); 6] = [
        ([4, 5, 6, 7], 1.0),
        ([0, 3, 2, 1], 0.8),
        ([0, 1, 5, 4], 0.85),
        ([2, 3, 7, 6], 0.85),
        ([1, 2, 6, 5], 0.92),
        ([3, 0, 4, 7], 0.92),
    ];
    faces
        .iter()
        .flat_map(|(f, k)| quad([p[f[0]], p[f[1]], p[f[2]], p[f[3]]], shade(color, *k), id))
        .collect()
}
