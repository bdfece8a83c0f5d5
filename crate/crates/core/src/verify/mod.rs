//! Numerical checks: an independent oracle, velocity fixed points, the
//! empirical contraction ratio, and the full verification suite.

pub mod contraction;
pub mod fixed_point;
pub mod oracle;
pub mod suite;
pub mod trajectory;

pub use contraction::{contraction_ratio, Bounds, ContractionReport, EXCLUSION_RADIUS};
pub use fixed_point::{
    sequential_fixed_point, velocity_fixed_point, velocity_map, FixedPointReport, VelocityMap,
};
pub use oracle::oracle_step;
pub use suite::{run_suite, Check, VerifyReport};
pub use trajectory::{trajectory_equal, TrajectoryDiff, TrajectoryError};
