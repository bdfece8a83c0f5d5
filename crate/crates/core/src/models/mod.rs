//! Differentiable objectives that feed `(loss, gradient)` pairs to the
//! optimizers: analytic test surfaces, logistic regression, a small MLP and a
//! sparse linear regression, plus the synthetic datasets behind them.

mod batch;
pub mod dataset;
pub mod functions;
pub mod logistic;
pub mod mlp;
pub mod sparse_linear;

use thiserror::Error;

pub use batch::Batcher;
pub use dataset::{synth_dataset, Dataset, DatasetSpec};
pub use functions::{make_test_function, Beale, Quadratic, Rastrigin, Rosenbrock, TestFunction};
pub use logistic::{make_logistic, Logistic};
pub use mlp::{make_mlp, Activation, MiniMlpSpec, Mlp, Reduction};
pub use sparse_linear::{make_sparse_linear, SparseLinear, SparseLinearSpec};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("dataset I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("dataset CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("dataset parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub grad: Vec<f64>,
}

/// Held-out metrics. `f1` is present for classifiers only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Validation {
    pub loss: f64,
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub theta: Option<Vec<f64>>,
    pub value: f64,
}

/// A scalar objective over a flat parameter vector.
///
/// Objectives are immutable once built, so evaluating them from several
/// threads at once is fine.
pub trait Objective: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    /// Full-batch training loss and gradient.
    fn eval(&self, theta: &[f64]) -> Result<Evaluation, ModelError>;

    /// Loss and gradient on the mini-batch used at optimizer step `step`
    /// (0-based). Objectives without data, or configured full-batch, return
    /// [`Objective::eval`].
    fn eval_step(&self, theta: &[f64], _step: u64) -> Result<Evaluation, ModelError> {
        self.eval(theta)
    }

    /// Loss on held-out data; objectives without data use the loss itself.
    fn validate(&self, theta: &[f64]) -> Result<Validation, ModelError> {
        Ok(Validation {
            loss: self.eval(theta)?.loss,
            f1: None,
        })
    }

    fn is_classifier(&self) -> bool {
        false
    }

    fn optimum(&self) -> Option<Optimum> {
        None
    }

    /// Deterministic starting point for a run with the given seed.
    fn initial_point(&self, _seed: u64) -> Vec<f64> {
        vec![0.0; self.dim()]
    }
}

pub(crate) fn check_dim(expected: usize, theta: &[f64]) -> Result<(), ModelError> {
    if theta.len() != expected {
        return Err(ModelError::Shape {
            expected,
            got: theta.len(),
        });
    }
    Ok(())
}

/// Central-difference gradient `(f(θ + h e_i) − f(θ − h e_i)) / 2h` of the
/// full-batch loss.
pub fn finite_diff_gradient(
    obj: &dyn Objective,
    theta: &[f64],
    h: f64,
) -> Result<Vec<f64>, ModelError> {
    if !(h > 0.0) {
        return Err(ModelError::Config(format!(
            "step h must be positive, got {h}"
        )));
    }
    check_dim(obj.dim(), theta)?;
    let mut probe = theta.to_vec();
    let mut out = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        probe[i] = theta[i] + h;
        let up = obj.eval(&probe)?.loss;
        probe[i] = theta[i] - h;
        let down = obj.eval(&probe)?.loss;
        probe[i] = theta[i];
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}

/// `‖a − b‖₂ / max(‖a‖₂, ‖b‖₂, floor)`.
pub fn relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    diff / norm(a).max(norm(b)).max(floor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_diff_on_identity_quadratic() {
        let q = make_test_function(TestFunction::Quadratic {
            a: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            b: vec![0.0, 0.0],
        })
        .unwrap();
        let fd = finite_diff_gradient(q.as_ref(), &[1.0, 0.0], 1e-6).unwrap();
        assert!((fd[0] - 1.0).abs() < 1e-8);
        assert!(fd[1].abs() < 1e-8);
    }

    #[test]
    fn finite_diff_on_rosenbrock_origin() {
        let r = make_test_function(TestFunction::Rosenbrock { dim: 2 }).unwrap();
        let fd = finite_diff_gradient(r.as_ref(), &[0.0, 0.0], 1e-6).unwrap();
        assert!((fd[0] + 2.0).abs() < 1e-6);
        assert!(fd[1].abs() < 1e-6);
    }

    #[test]
    fn finite_diff_rejects_nonpositive_step() {
        let r = make_test_function(TestFunction::Beale).unwrap();
        assert!(matches!(
            finite_diff_gradient(r.as_ref(), &[0.0, 0.0], 0.0),
            Err(ModelError::Config(_))
        ));
        assert!(finite_diff_gradient(r.as_ref(), &[0.0, 0.0], -1e-3).is_err());
    }
}
