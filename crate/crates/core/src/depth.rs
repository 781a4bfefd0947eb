//! Ground-truth depth: near-plane ray distances, NDC to metric conversion
//! and the forward mapping used by the rasterizer.
//!
//! Three conversion profiles are provided. [`ProfileKind::SimNative`] is the
//! exact inverse of the projection the rasterizer writes and is the one used
//! for ground truth. The other two reproduce published conversion formulas
//! literally; they are kept for compatibility studies and only accept inputs
//! inside their own valid ranges.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{infinity, is_finite, lit, to_f64, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DepthError {
    #[error("field of view {0} deg outside (0, 180)")]
    DegenerateFov(f64),
    #[error("clip planes must satisfy 0 < near < far (near={near}, far={far})")]
    InvalidClip { near: f64, far: f64 },
    #[error("image size {width}x{height} must be non-zero")]
    EmptyImage { width: usize, height: usize },
    #[error("raster has {actual} values, expected {expected}")]
    SizeMismatch { expected: usize, actual: usize },
    #[error("depth {depth} at pixel {index} outside the profile's valid range")]
    OutOfRange { index: usize, depth: f64 },
}

/// Which NDC convention a conversion assumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    /// `ndc = far·(z − near) / (z·(far − near))`, exact closed-form inverse.
    SimNative,
    /// `depth = map / (1 − ndc·near/(2·far))`.
    ScaledReciprocal,
    /// `depth = map / (ndc + map·near/(2·far))`.
    OffsetReciprocal,
}

impl ProfileKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::SimNative => "sim-native",
            Self::ScaledReciprocal => "scaled-reciprocal",
            Self::OffsetReciprocal => "offset-reciprocal",
        }
    }
}

impl std::str::FromStr for ProfileKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sim-native" => Ok(Self::SimNative),
            "scaled-reciprocal" => Ok(Self::ScaledReciprocal),
            "offset-reciprocal" => Ok(Self::OffsetReciprocal),
            other => Err(format!("unknown depth profile `{other}`")),
        }
    }
}

/// Whether a metric raster holds euclidean ray distances or planar `Z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DepthSemantics {
    #[default]
    Ray,
    Planar,
}

/// Camera frustum parameters needed by the depth pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frustum<T: Real> {
    pub width: usize,
    pub height: usize,
    pub hfov_deg: T,
    pub vfov_deg: T,
    pub near: T,
    pub far: T,
}

impl<T: Real> Frustum<T> {
    pub fn validate(&self) -> Result<(), DepthError> {
        for fov in [self.hfov_deg, self.vfov_deg] {
            if !(fov > T::zero() && fov < lit(180.0)) {
                return Err(DepthError::DegenerateFov(to_f64(fov)));
            }
        }
        if !(self.near > T::zero() && self.near < self.far) {
            return Err(DepthError::InvalidClip {
                near: to_f64(self.near),
                far: to_f64(self.far),
            });
        }
        if self.width == 0 || self.height == 0 {
            return Err(DepthError::EmptyImage {
                width: self.width,
                height: self.height,
            });
        }
        Ok(())
    }

    /// `tan(hfov/2)` and `tan(vfov/2)`.
    pub fn half_extents(&self) -> (T, T) {
        let half = |deg: T| (deg.to_radians() * lit(0.5)).tan();
        (half(self.hfov_deg), half(self.vfov_deg))
    }

    /// Focal lengths in pixels.
    pub fn focal(&self) -> (T, T) {
        let (tx, ty) = self.half_extents();
        let w: T = lit(self.width as f64);
        let h: T = lit(self.height as f64);
        (w * lit(0.5) / tx, h * lit(0.5) / ty)
    }

    pub fn principal_point(&self) -> (T, T) {
        (lit(self.width as f64 * 0.5), lit(self.height as f64 * 0.5))
    }
}

trait Degrees {
    fn to_radians(self) -> Self;
}

impl<T: Real> Degrees for T {
    fn to_radians(self) -> Self {
        self * T::pi() / lit(180.0)
    }
}

/// Per-pixel distance from the camera center to the pixel's point on the
/// near clipping plane.
#[derive(Debug, Clone, PartialEq)]
pub struct MapUv<T: Real> {
    pub width: usize,
    pub height: usize,
    pub near: T,
    tan_half: (T, T),
    grid: Vec<T>,
}

impl<T: Real> MapUv<T> {
    /// Grid sampled at pixel centers `(i + 0.5, j + 0.5)`.
    pub fn compute(frustum: &Frustum<T>) -> Result<Self, DepthError> {
        frustum.validate()?;
        let tan_half = frustum.half_extents();
        let mut map = Self {
            width: frustum.width,
            height: frustum.height,
            near: frustum.near,
            tan_half,
            grid: Vec::with_capacity(frustum.width * frustum.height),
        };
        for j in 0..frustum.height {
            for i in 0..frustum.width {
                let v = map.at(lit(i as f64 + 0.5), lit(j as f64 + 0.5));
                map.grid.push(v);
            }
        }
        Ok(map)
    }

    /// Evaluates the map at continuous pixel coordinates; the principal
    /// point sits at `(width/2, height/2)`.
    pub fn at(&self, u: T, v: T) -> T {
        let (x, y) = self.normalized(u, v);
        self.near * (T::one() + x * x + y * y).sqrt()
    }

    /// Normalized image-plane coordinates of a continuous pixel position.
    pub fn normalized(&self, u: T, v: T) -> (T, T) {
        let hw: T = lit(self.width as f64 * 0.5);
        let hh: T = lit(self.height as f64 * 0.5);
        (
            (u - hw) / hw * self.tan_half.0,
            (v - hh) / hh * self.tan_half.1,
        )
    }

    pub fn grid(&self) -> &[T] {
        &self.grid
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.grid[j * self.width + i]
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }
}

/// Conversion profile: convention plus clip distances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthConversionProfile<T: Real> {
    pub kind: ProfileKind,
    pub near: T,
    pub far: T,
}

impl<T: Real> DepthConversionProfile<T> {
    pub fn new(kind: ProfileKind, near: T, far: T) -> Result<Self, DepthError> {
        if !(near > T::zero() && near < far) {
            return Err(DepthError::InvalidClip {
                near: to_f64(near),
                far: to_f64(far),
            });
        }
        Ok(Self { kind, near, far })
    }

    pub fn sim_native(near: T, far: T) -> Result<Self, DepthError> {
        Self::new(ProfileKind::SimNative, near, far)
    }

    /// Half of the `near/far` ratio that both published formulas use.
    fn half_ratio(&self) -> T {
        self.near / (lit::<T>(2.0) * self.far)
    }

    /// Forward perspective mapping of planar depth (sim-native convention).
    /// Writes `1` (the cleared value) for depths at or beyond the far plane.
    pub fn planar_to_ndc(&self, z: T) -> T {
        if z >= self.far {
            return T::one();
        }
        self.far * (z - self.near) / (z * (self.far - self.near))
    }

    /// Inverse of [`planar_to_ndc`](Self::planar_to_ndc). `None` for the
    /// cleared value and for inputs outside `[0, 1)`.
    pub fn ndc_to_planar_native(&self, ndc: T) -> Option<T> {
        if !(ndc >= T::zero() && ndc < T::one()) {
            return None;
        }
        Some(self.far * self.near / (self.far - ndc * (self.far - self.near)))
    }

    /// NDC to ray distance for a pixel whose near-plane distance is `map_uv`.
    pub fn ndc_to_ray(&self, ndc: T, map_uv: T) -> Option<T> {
        match self.kind {
            ProfileKind::SimNative => self
                .ndc_to_planar_native(ndc)
                .map(|z| z * map_uv / self.near),
            ProfileKind::ScaledReciprocal => {
                if !(ndc >= T::zero() && ndc <= T::one()) {
                    return None;
                }
                Some(map_uv / (T::one() - ndc * self.half_ratio()))
            }
            ProfileKind::OffsetReciprocal => {
                if !(ndc >= T::zero() && ndc <= T::one()) {
                    return None;
                }
                Some(map_uv / (ndc + map_uv * self.half_ratio()))
            }
        }
    }

    /// Ray distance to NDC; `None` outside the profile's valid depth range.
    pub fn ray_to_ndc(&self, ray: T, map_uv: T) -> Option<T> {
        let (lo, hi) = self.valid_ray_range(map_uv);
        let slack: T = lit(1e-12);
        if !(ray >= lo * (T::one() - slack) && ray <= hi * (T::one() + slack)) {
            return None;
        }
        let ndc = match self.kind {
            ProfileKind::SimNative => {
                let z = ray * self.near / map_uv;
                let z = z.clamp(self.near, self.far);
                self.far * (z - self.near) / (z * (self.far - self.near))
            }
            ProfileKind::ScaledReciprocal => (T::one() - map_uv / ray) / self.half_ratio(),
            ProfileKind::OffsetReciprocal => map_uv / ray - map_uv * self.half_ratio(),
        };
        Some(ndc.clamp(T::zero(), T::one()))
    }

    /// Closed interval of ray distances the profile can represent with
    /// `ndc ∈ [0, 1]` at a pixel with near-plane distance `map_uv`.
    pub fn valid_ray_range(&self, map_uv: T) -> (T, T) {
        match self.kind {
            ProfileKind::SimNative => {
                let s = map_uv / self.near;
                (self.near * s, self.far * s)
            }
            ProfileKind::ScaledReciprocal => (map_uv, map_uv / (T::one() - self.half_ratio())),
            ProfileKind::OffsetReciprocal => {
                let k = map_uv * self.half_ratio();
                (map_uv / (T::one() + k), map_uv / k)
            }
        }
    }
}

/// Metric depth raster, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthRaster<T: Real> {
    pub width: usize,
    pub height: usize,
    pub semantics: DepthSemantics,
    pub data: Vec<T>,
}

impl<T: Real> DepthRaster<T> {
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[j * self.width + i]
    }
}

/// Result of a batch NDC conversion.
#[derive(Debug, Clone, PartialEq)]
pub struct Converted<T: Real> {
    pub depth: DepthRaster<T>,
    /// Pixels holding the cleared far value.
    pub cleared: usize,
    /// Pixels whose NDC value the profile cannot invert.
    pub invalid: usize,
}

/// Scalar conversion of one pixel; far sentinel (`+inf`) when not invertible.
pub fn convert_pixel<T: Real>(
    ndc: T,
    map_uv: T,
    profile: &DepthConversionProfile<T>,
    semantics: DepthSemantics,
) -> Option<T> {
    let ray = profile.ndc_to_ray(ndc, map_uv)?;
    Some(match semantics {
        DepthSemantics::Ray => ray,
        DepthSemantics::Planar => ray * profile.near / map_uv,
    })
}

/// Converts a whole NDC raster to metric depth.
pub fn ndc_to_depth<T: Real>(
    ndc: &[T],
    map: &MapUv<T>,
    profile: &DepthConversionProfile<T>,
    semantics: DepthSemantics,
) -> Result<Converted<T>, DepthError> {
    if ndc.len() != map.len() {
        return Err(DepthError::SizeMismatch {
            expected: map.len(),
            actual: ndc.len(),
        });
    }
    let mut cleared = 0;
    let mut invalid = 0;
    let data = ndc
        .iter()
        .zip(map.grid())
        .map(|(&n, &m)| match convert_pixel(n, m, profile, semantics) {
            Some(d) => d,
            None => {
                if n == T::one() {
                    cleared += 1;
                } else {
                    invalid += 1;
                }
                infinity()
            }
        })
        .collect();
    Ok(Converted {
        depth: DepthRaster {
            width: map.width,
            height: map.height,
            semantics,
            data,
        },
        cleared,
        invalid,
    })
}

/// Forward conversion of a metric raster back to NDC. Far sentinels map to
/// the cleared value for the sim-native profile.
pub fn depth_to_ndc<T: Real>(
    depth: &DepthRaster<T>,
    map: &MapUv<T>,
    profile: &DepthConversionProfile<T>,
) -> Result<Vec<T>, DepthError> {
    if depth.data.len() != map.len() {
        return Err(DepthError::SizeMismatch {
            expected: map.len(),
            actual: depth.data.len(),
        });
    }
    depth
        .data
        .iter()
        .zip(map.grid())
        .enumerate()
        .map(|(index, (&d, &m))| {
            if !is_finite(d) && profile.kind == ProfileKind::SimNative && d > T::zero() {
                return Ok(T::one());
            }
            let ray = match depth.semantics {
                DepthSemantics::Ray => d,
                DepthSemantics::Planar => d * m / profile.near,
            };
            profile.ray_to_ndc(ray, m).ok_or(DepthError::OutOfRange {
                index,
                depth: to_f64(d),
            })
        })
        .collect()
}
