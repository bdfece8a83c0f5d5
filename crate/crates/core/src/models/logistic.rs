//! Binary logistic regression, mean negative log-likelihood.
//!
//! Parameters are the `dim` weights followed by one bias.

use super::{check_dim, Batcher, Dataset, Evaluation, ModelError, Objective, Validation};

#[derive(Debug, Clone)]
pub struct Logistic {
    data: Dataset,
    batcher: Batcher,
}

pub fn make_logistic(data: Dataset, batch_size: Option<usize>) -> Result<Logistic, ModelError> {
    if data.labels.iter().any(|y| *y != 0.0 && *y != 1.0) {
        return Err(ModelError::Config(
            "logistic regression needs 0/1 labels".into(),
        ));
    }
    let train_labels = data.train.iter().map(|&i| data.labels[i]);
    let positives = train_labels.clone().filter(|y| *y == 1.0).count();
    if positives == 0 || positives == data.train.len() {
        return Err(ModelError::Config(
            "training split contains a single class; the likelihood has no minimizer".into(),
        ));
    }
    let batcher = Batcher::new(data.train.clone(), batch_size, data.seed);
    Ok(Logistic { data, batcher })
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Logistic {
    fn margin(&self, theta: &[f64], i: usize) -> f64 {
        let d = self.data.dim;
        let x = self.data.row(i);
        theta[..d].iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + theta[d]
    }

    fn eval_on(&self, theta: &[f64], idx: &[usize]) -> Result<Evaluation, ModelError> {
        check_dim(self.dim(), theta)?;
        let d = self.data.dim;
        let mut grad = vec![0.0; d + 1];
        let mut loss = 0.0;
        for &i in idx {
            let z = self.margin(theta, i);
            let y = self.data.labels[i];
            // -[y log σ(z) + (1 - y) log(1 - σ(z))] = softplus(z) - y z
            loss += softplus(z) - y * z;
            let r = sigmoid(z) - y;
            for (g, x) in grad[..d].iter_mut().zip(self.data.row(i)) {
                *g += r * x;
            }
            grad[d] += r;
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

impl Objective for Logistic {
    fn name(&self) -> &str {
        "logistic"
    }

    fn dim(&self) -> usize {
        self.data.dim + 1
    }

    fn eval(&self, theta: &[f64]) -> Result<Evaluation, ModelError> {
        self.eval_on(theta, self.batcher.all())
    }

    fn eval_step(&self, theta: &[f64], step: u64) -> Result<Evaluation, ModelError> {
        if self.batcher.is_full_batch() {
            return self.eval(theta);
        }
        self.eval_on(theta, &self.batcher.batch(step))
    }

    fn validate(&self, theta: &[f64]) -> Result<Validation, ModelError> {
        if self.data.val.is_empty() {
            return Ok(Validation {
                loss: self.eval(theta)?.loss,
                f1: None,
            });
        }
        let loss = self.eval_on(theta, &self.data.val)?.loss;
        let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
        for &i in &self.data.val {
            let pred = self.margin(theta, i) > 0.0;
            let truth = self.data.labels[i] == 1.0;
            match (pred, truth) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fneg += 1,
                _ => {}
            }
        }
        let denom = 2 * tp + fp + fneg;
        let f1 = if denom == 0 {
            0.0
        } else {
            2.0 * tp as f64 / denom as f64
        };
        Ok(Validation { loss, f1: Some(f1) })
    }

    fn is_classifier(&self) -> bool {
        true
    }
}
