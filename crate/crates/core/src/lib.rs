//! EVE: a first-order optimizer with two learning rates, short- and
//! long-term momenta, and coupled residual velocities.
//!
//! - [`optim`]: EVE and baseline update rules as pure state transitions.
//! - [`models`]: objectives and synthetic datasets.
//! - [`verify`]: an independent scalar oracle and numeric checks of the
//!   method's convergence properties.
//! - [`harness`]: learning-rate sweeps, summary statistics and exports.

// Validation checks read `!(x > 0.0)` so that NaN is rejected too, and the
// numeric kernels index several parallel slices by the same position.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod harness;
pub mod models;
pub mod optim;
pub mod rng;
pub mod verify;
