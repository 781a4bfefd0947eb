#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Single-viewport stereo capture simulator with temporal-controlled frame
//! swapping, plus the tooling to evaluate the resulting stereo data:
//! ground-truth depth conversion, a beacon-based stereo odometry baseline
//! and APE/RPE trajectory metrics.
//!
//! The numeric modules ([`depth`], [`timebase`], [`traj_eval`], [`vo`] and
//! [`geometry`]) are generic over [`Real`]; the aliases at the crate root pin
//! the `f64` versions used by the simulator.

pub mod capture;
pub mod dataset_io;
pub mod depth;
pub mod geometry;
pub mod render;
pub mod scalar;
pub mod scenario;
pub mod sim;
pub mod timebase;
pub mod traj_eval;
pub mod validation;
pub mod vo;

pub use scalar::Real;

pub type Pose = geometry::Se3<f64>;
pub type Pose32 = geometry::Se3<f32>;
pub type Similarity = geometry::Similarity<f64>;
pub type Trajectory = traj_eval::Trajectory<f64>;
pub type Trajectory32 = traj_eval::Trajectory<f32>;
pub type MapUv = depth::MapUv<f64>;
pub type DepthProfile = depth::DepthConversionProfile<f64>;
pub type DepthRaster = depth::DepthRaster<f64>;
pub type MetricReport = traj_eval::MetricReport<f64>;
