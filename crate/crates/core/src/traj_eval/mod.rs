//! Trajectory evaluation: alignment, absolute and relative pose error,
//! and length-ratio scale correction.

mod align;
mod metrics;
mod trajectory;

use thiserror::Error;

pub use align::{umeyama, umeyama_align};
pub use metrics::{
    ape, ape_with, associate, rpe, rpe_by_distance, rpe_with, scale_correct, Alignment, ApeReport,
    Association, MetricKind, MetricReport, RpeReport, Statistics,
};
pub use trajectory::{traj_length, Stamped, Trajectory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("timestamps must be strictly increasing (index {index})")]
    NonMonotonicTime { index: usize },
    #[error("trajectory needs at least {needed} poses, has {actual}")]
    TooShort { needed: usize, actual: usize },
    #[error("degenerate point configuration: {0}")]
    Degenerate(&'static str),
    #[error("point sets differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("no poses could be associated between the trajectories")]
    EmptyAssociation,
    #[error("relative offset {delta} must be smaller than the trajectory length {len}")]
    DeltaTooLarge { delta: usize, len: usize },
    #[error("estimated trajectory has zero length")]
    ZeroLength,
}
