//! Least-squares linear regression over k-hot features.
//!
//! With one example per step the gradient is zero outside that example's
//! active features, so at low density it is mostly zeros and the optimizer's
//! sparse branch fires. The full-batch gradient touches every feature.

use serde::{Deserialize, Serialize};

use super::dataset::active_features;
use super::{
    check_dim, synth_dataset, Batcher, Dataset, DatasetSpec, Evaluation, ModelError, Objective,
    Validation,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SparseLinearSpec {
    pub n: usize,
    pub dim: usize,
    pub density: f64,
    #[serde(default)]
    pub val_frac: f64,
    /// Examples per step; `None` is full batch.
    #[serde(default = "default_batch")]
    pub batch_size: Option<usize>,
}

fn default_batch() -> Option<usize> {
    Some(1)
}

#[derive(Debug, Clone)]
pub struct SparseLinear {
    data: Dataset,
    /// Active feature indices per example.
    support: Vec<Vec<usize>>,
    batcher: Batcher,
}

pub fn make_sparse_linear(spec: &SparseLinearSpec, seed: u64) -> Result<SparseLinear, ModelError> {
    active_features(spec.dim, spec.density)?;
    let data = synth_dataset(
        &DatasetSpec::KHot {
            n: spec.n,
            dim: spec.dim,
            density: spec.density,
            val_frac: spec.val_frac,
        },
        seed,
    )?;
    let support = (0..data.n)
        .map(|i| {
            data.row(i)
                .iter()
                .enumerate()
                .filter(|(_, x)| **x != 0.0)
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    let batcher = Batcher::new(data.train.clone(), spec.batch_size, data.seed);
    Ok(SparseLinear {
        data,
        support,
        batcher,
    })
}

impl SparseLinear {
    fn eval_on(&self, theta: &[f64], idx: &[usize]) -> Result<Evaluation, ModelError> {
        check_dim(self.data.dim, theta)?;
        let mut grad = vec![0.0; self.data.dim];
        let mut loss = 0.0;
        for &i in idx {
            let x = self.data.row(i);
            let pred: f64 = self.support[i].iter().map(|&j| theta[j] * x[j]).sum();
            let r = pred - self.data.labels[i];
            loss += 0.5 * r * r;
            for &j in &self.support[i] {
                grad[j] += r * x[j];
            }
        }
        let n = idx.len() as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        Ok(Evaluation {
            loss: loss / n,
            grad,
        })
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }
}

impl Objective for SparseLinear {
    fn name(&self) -> &str {
        "sparse_linear"
    }

    fn dim(&self) -> usize {
        self.data.dim
    }

    fn eval(&self, theta: &[f64]) -> Result<Evaluation, ModelError> {
        self.eval_on(theta, self.batcher.all())
    }

    fn eval_step(&self, theta: &[f64], step: u64) -> Result<Evaluation, ModelError> {
        self.eval_on(theta, &self.batcher.batch(step))
    }

    fn validate(&self, theta: &[f64]) -> Result<Validation, ModelError> {
        let idx = if self.data.val.is_empty() {
            self.batcher.all()
        } else {
            &self.data.val[..]
        };
        Ok(Validation {
            loss: self.eval_on(theta, idx)?.loss,
            f1: None,
        })
    }
}
