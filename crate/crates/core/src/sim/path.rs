//! Scripted ego path: straights and circular arcs joined with C¹
//! continuity.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::SimError;

/// One path piece as written in scenario files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SegmentSpec {
    Straight {
        length: f64,
    },
    /// Positive `angle_deg` turns left (counter-clockwise).
    Arc {
        radius: f64,
        angle_deg: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    /// `[x, y, heading_deg]` of the first pose.
    pub start: [f64; 3],
    pub segments: Vec<SegmentSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Piece {
    start: Vector2<f64>,
    heading: f64,
    offset: f64,
    length: f64,
    /// Signed curvature, zero for straights.
    curvature: f64,
}

impl Piece {
    fn eval(&self, ds: f64) -> PathPoint {
        if self.curvature == 0.0 {
            let dir = Vector2::new(self.heading.cos(), self.heading.sin());
            PathPoint {
                position: self.start + dir * ds,
                heading: self.heading,
            }
        } else {
            let k = self.curvature;
            let h = self.heading + k * ds;
            let delta =
                Vector2::new(h.sin() - self.heading.sin(), self.heading.cos() - h.cos()) / k;
            PathPoint {
                position: self.start + delta,
                heading: h,
            }
        }
    }
}

/// Position and heading at some arc length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathPoint {
    pub position: Vector2<f64>,
    pub heading: f64,
}

impl PathPoint {
    pub fn forward(&self) -> Vector2<f64> {
        Vector2::new(self.heading.cos(), self.heading.sin())
    }

    pub fn left(&self) -> Vector2<f64> {
        Vector2::new(-self.heading.sin(), self.heading.cos())
    }

    /// Point `lateral` meters to the left (negative: right).
    pub fn offset(&self, lateral: f64) -> Vector2<f64> {
        self.position + self.left() * lateral
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pieces: Vec<Piece>,
    length: f64,
}

impl Path {
    pub fn from_spec(spec: &PathSpec) -> Result<Self, SimError> {
        if spec.segments.is_empty() {
            return Err(SimError::InvalidPath("path has no segments".into()));
        }
        let mut point = PathPoint {
            position: Vector2::new(spec.start[0], spec.start[1]),
            heading: spec.start[2].to_radians(),
        };
        let mut offset = 0.0;
        let mut pieces = Vec::with_capacity(spec.segments.len());
        for (i, seg) in spec.segments.iter().enumerate() {
            let (length, curvature) = match *seg {
                SegmentSpec::Straight { length } => (length, 0.0),
                SegmentSpec::Arc { radius, angle_deg } => {
                    if !(radius > 0.0) || angle_deg == 0.0 {
                        return Err(SimError::InvalidPath(format!(
                            "segment {i}: arc needs positive radius and non-zero angle"
                        )));
                    }
                    (
                        radius * angle_deg.abs().to_radians(),
                        angle_deg.signum() / radius,
                    )
                }
            };
            if !(length > 0.0) || !length.is_finite() {
                return Err(SimError::InvalidPath(format!(
                    "segment {i}: length must be positive"
                )));
            }
            let piece = Piece {
                start: point.position,
                heading: point.heading,
                offset,
                length,
                curvature,
            };
            point = piece.eval(length);
            offset += length;
            pieces.push(piece);
        }
        Ok(Self {
            pieces,
            length: offset,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Point at arc length `s ∈ [0, length]`.
    pub fn point_at(&self, s: f64) -> Result<PathPoint, SimError> {
        let tol = 1e-9 * self.length.max(1.0);
        if !(s >= -tol && s <= self.length + tol) {
            return Err(SimError::OutOfRange {
                value: s,
                limit: self.length,
            });
        }
        Ok(self.eval_clamped(s))
    }

    /// Point at `s` wrapped into the path length.
    pub fn point_wrapped(&self, s: f64) -> PathPoint {
        self.eval_clamped(s.rem_euclid(self.length))
    }

    /// Whether the end pose coincides with the start pose.
    pub fn is_closed(&self) -> bool {
        let a = self.eval_clamped(0.0);
        let b = self.eval_clamped(self.length);
        let dh = (b.heading - a.heading).rem_euclid(std::f64::consts::TAU);
        (b.position - a.position).norm() < 1e-6 && dh.min(std::f64::consts::TAU - dh) < 1e-9
    }

    /// Point at `s`, continued along the end tangents outside `[0, length]`.
    pub fn point_extended(&self, s: f64) -> PathPoint {
        let (anchor, rest) = if s < 0.0 {
            (0.0, s)
        } else if s > self.length {
            (self.length, s - self.length)
        } else {
            return self.eval_clamped(s);
        };
        let p = self.eval_clamped(anchor);
        PathPoint {
            position: p.position + p.forward() * rest,
            heading: p.heading,
        }
    }

    fn eval_clamped(&self, s: f64) -> PathPoint {
        let s = s.clamp(0.0, self.length);
        let idx = self
            .pieces
            .partition_point(|p| p.offset + p.length < s)
            .min(self.pieces.len() - 1);
        let piece = &self.pieces[idx];
        piece.eval(s - piece.offset)
    }
}
