//! Optimizer state transitions.
//!
//! Everything here is value-in/value-out over flat `f64` parameter vectors.
//! [`eve`] holds the dual-rate, dual-momentum, residual-velocity optimizer and
//! [`baseline`] the comparators (SGD, heavy-ball momentum, Adam, AMSGrad).
//! The [`Optimizer`] trait wraps either family in a small stateful stepper so
//! the harness can drive them uniformly.

pub mod baseline;
pub mod eve;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use baseline::{baseline_step, BaselineConfig, BaselineKind, BaselineState, BaselineStep};
pub use eve::{
    classify_gradient, effective_rates, eve_step, update_momenta, update_velocities, EveConfig,
    EveState, EveStep, Momenta,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimError {
    #[error("invalid gradient: entry {index} is {value}")]
    InvalidGradient { index: usize, value: f64 },
    #[error("empty gradient")]
    EmptyGradient,
    #[error("shape mismatch for {what}: expected length {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("optimizer state corrupted: {0}")]
    StateCorruption(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid optimizer config: {0}")]
    Config(String),
}

/// Which coefficient regime of the velocity and secondary-rate updates applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradientMode {
    Sparse,
    Dense,
}

/// What one step of a stateful optimizer reports back to its driver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    /// Branch taken, for optimizers that branch on gradient sparsity.
    pub mode: Option<GradientMode>,
    /// Set when the new parameters contain a non-finite entry.
    pub diverged: bool,
}

pub trait Optimizer: Send {
    fn name(&self) -> &'static str;

    /// Applies one update in place.
    fn step(&mut self, theta: &mut Vec<f64>, grad: &[f64]) -> Result<StepReport, OptimError>;
}

/// Stateful wrapper around [`eve_step`].
#[derive(Debug, Clone)]
pub struct Eve {
    pub config: EveConfig,
    pub state: EveState,
}

impl Eve {
    pub fn new(config: EveConfig, dim: usize) -> Result<Self, OptimError> {
        config.validate()?;
        Ok(Self {
            config,
            state: EveState::new(dim),
        })
    }
}

impl Optimizer for Eve {
    fn name(&self) -> &'static str {
        "eve"
    }

    fn step(&mut self, theta: &mut Vec<f64>, grad: &[f64]) -> Result<StepReport, OptimError> {
        let out = eve_step(theta, grad, &self.state, &self.config)?;
        *theta = out.theta;
        self.state = out.state;
        Ok(StepReport {
            mode: Some(out.mode),
            diverged: out.diverged,
        })
    }
}

/// Stateful wrapper around [`baseline_step`].
#[derive(Debug, Clone)]
pub struct Baseline {
    pub kind: BaselineKind,
    pub config: BaselineConfig,
    pub state: BaselineState,
}

impl Baseline {
    pub fn new(kind: BaselineKind, config: BaselineConfig, dim: usize) -> Result<Self, OptimError> {
        config.validate(kind)?;
        Ok(Self {
            kind,
            config,
            state: BaselineState::new(dim),
        })
    }
}

impl Optimizer for Baseline {
    fn name(&self) -> &'static str {
        self.kind.name()
    }

    fn step(&mut self, theta: &mut Vec<f64>, grad: &[f64]) -> Result<StepReport, OptimError> {
        let out = baseline_step(self.kind, theta, grad, &self.state, &self.config)?;
        *theta = out.theta;
        self.state = out.state;
        Ok(StepReport {
            mode: None,
            diverged: out.diverged,
        })
    }
}

pub(crate) fn check_finite(g: &[f64]) -> Result<(), OptimError> {
    match g.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(OptimError::InvalidGradient {
            index,
            value: g[index],
        }),
        None => Ok(()),
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), OptimError> {
    if expected != got {
        return Err(OptimError::Shape {
            what,
            expected,
            got,
        });
    }
    Ok(())
}
