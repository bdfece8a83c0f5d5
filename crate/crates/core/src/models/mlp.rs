//! Fully connected classifier with softmax cross-entropy.
//!
//! The gradient is a hand-written reverse pass over the fixed layer graph.
//! Parameters are laid out layer by layer, each as a row-major weight matrix
//! `(out × in)` followed by its bias vector.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_dim, Batcher, Dataset, Evaluation, ModelError, Objective, Validation};
use crate::rng;

const MAX_PARAMS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the activation output `a` and input `z`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    Mean,
    Sum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MiniMlpSpec {
    /// Input width, hidden widths, output (class count), in order.
    pub widths: Vec<usize>,
    pub activation: Activation,
    #[serde(default = "default_reduction")]
    pub reduction: Reduction,
    #[serde(default)]
    pub init_seed: u64,
    #[serde(default)]
    pub batch_size: Option<usize>,
}

fn default_reduction() -> Reduction {
    Reduction::Mean
}

impl MiniMlpSpec {
    pub fn param_count(&self) -> usize {
        self.widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.widths.len() < 3 {
            return Err(ModelError::Config(
                "an MLP needs input, at least one hidden layer, and output widths".into(),
            ));
        }
        if self.widths.contains(&0) {
            return Err(ModelError::Config("layer widths must be positive".into()));
        }
        if *self.widths.last().unwrap() < 2 {
            return Err(ModelError::Config(
                "softmax output needs at least 2 classes".into(),
            ));
        }
        let p = self.param_count();
        if p >= MAX_PARAMS {
            return Err(ModelError::Config(format!(
                "{p} parameters exceeds the desk-scale limit of {MAX_PARAMS}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Mlp {
    spec: MiniMlpSpec,
    data: Dataset,
    batcher: Batcher,
    /// Offset of each layer's weights in the flat parameter vector.
    offsets: Vec<usize>,
}

pub fn make_mlp(spec: MiniMlpSpec, data: Dataset) -> Result<Mlp, ModelError> {
    spec.validate()?;
    let input = spec.widths[0];
    if input != data.dim {
        return Err(ModelError::Shape {
            expected: data.dim,
            got: input,
        });
    }
    let classes = data
        .classes
        .ok_or_else(|| ModelError::Config("MLP classifier needs class labels".into()))?;
    let out = *spec.widths.last().unwrap();
    if out != classes {
        return Err(ModelError::Shape {
            expected: classes,
            got: out,
        });
    }
    let mut offsets = Vec::with_capacity(spec.widths.len() - 1);
    let mut off = 0;
    for w in spec.widths.windows(2) {
        offsets.push(off);
        off += w[0] * w[1] + w[1];
    }
    let batcher = Batcher::new(data.train.clone(), spec.batch_size, data.seed);
    Ok(Mlp {
        spec,
        data,
        batcher,
        offsets,
    })
}

struct Tape {
    /// Pre-activations per layer.
    z: Vec<Vec<f64>>,
    /// Activations, `a[0]` is the input.
    a: Vec<Vec<f64>>,
}

impl Mlp {
    fn layers(&self) -> usize {
        self.spec.widths.len() - 1
    }

    fn forward(&self, theta: &[f64], x: &[f64]) -> Tape {
        let mut a = vec![x.to_vec()];
        let mut z = Vec::with_capacity(self.layers());
        for l in 0..self.layers() {
            let (n_in, n_out) = (self.spec.widths[l], self.spec.widths[l + 1]);
            let w = &theta[self.offsets[l]..self.offsets[l] + n_in * n_out];
            let b = &theta[self.offsets[l] + n_in * n_out..self.offsets[l] + n_in * n_out + n_out];
            let prev = &a[l];
            let zl: Vec<f64> = (0..n_out)
                .map(|o| {
                    w[o * n_in..(o + 1) * n_in]
                        .iter()
                        .zip(prev)
                        .map(|(w, x)| w * x)
                        .sum::<f64>()
                        + b[o]
                })
                .collect();
            let al = if l + 1 == self.layers() {
                zl.clone()
            } else {
                zl.iter().map(|&v| self.spec.activation.apply(v)).collect()
            };
            z.push(zl);
            a.push(al);
        }
        Tape { z, a }
    }

    pub fn logits(&self, theta: &[f64], x: &[f64]) -> Result<Vec<f64>, ModelError> {
        check_dim(self.dim(), theta)?;
        check_dim(self.spec.widths[0], x)?;
        Ok(self.forward(theta, x).a.pop().unwrap())
    }

    fn cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
        let max = logits.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b));
        let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        let loss = sum.ln() + max - logits[label];
        let mut d: Vec<f64> = exps.iter().map(|e| e / sum).collect();
        d[label] -= 1.0;
        (loss, d)
    }

    fn eval_on(&self, theta: &[f64], idx: &[usize]) -> Result<Evaluation, ModelError> {
        check_dim(self.dim(), theta)?;
        let mut grad = vec![0.0; theta.len()];
        let mut loss = 0.0;
        for &i in idx {
            let tape = self.forward(theta, self.data.row(i));
            let label = self.data.labels[i] as usize;
            let (li, mut delta) = Self::cross_entropy(&tape.a[self.layers()], label);
            loss += li;
            for l in (0..self.layers()).rev() {
                let (n_in, n_out) = (self.spec.widths[l], self.spec.widths[l + 1]);
                let off = self.offsets[l];
                let prev = &tape.a[l];
                for o in 0..n_out {
                    let row = &mut grad[off + o * n_in..off + (o + 1) * n_in];
                    for (g, x) in row.iter_mut().zip(prev) {
                        *g += delta[o] * x;
                    }
                    grad[off + n_in * n_out + o] += delta[o];
                }
                if l == 0 {
                    break;
                }
                let w = &theta[off..off + n_in * n_out];
                delta = (0..n_in)
                    .map(|j| {
                        let back: f64 = (0..n_out).map(|o| w[o * n_in + j] * delta[o]).sum();
                        back * self
                            .spec
                            .activation
                            .derivative(tape.z[l - 1][j], tape.a[l][j])
                    })
                    .collect();
            }
        }
        if self.spec.reduction == Reduction::Mean {
            let n = idx.len() as f64;
            loss /= n;
            grad.iter_mut().for_each(|g| *g /= n);
        }
        Ok(Evaluation { loss, grad })
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }
}

impl Objective for Mlp {
    fn name(&self) -> &str {
        "mlp"
    }

    fn dim(&self) -> usize {
        self.spec.param_count()
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
        let idx = if self.data.val.is_empty() {
            self.batcher.all()
        } else {
            &self.data.val[..]
        };
        let mut loss = 0.0;
        let k = *self.spec.widths.last().unwrap();
        let mut confusion = vec![vec![0usize; k]; k];
        for &i in idx {
            let logits = self.logits(theta, self.data.row(i))?;
            let label = self.data.labels[i] as usize;
            loss += Self::cross_entropy(&logits, label).0;
            let pred = logits
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (c, &z)| {
                    if z > best.1 {
                        (c, z)
                    } else {
                        best
                    }
                })
                .0;
            confusion[label][pred] += 1;
        }
        // macro F1 over classes
        let mut f1 = 0.0;
        for c in 0..k {
            let tp = confusion[c][c];
            let fp: usize = (0..k).filter(|&r| r != c).map(|r| confusion[r][c]).sum();
            let fneg: usize = (0..k).filter(|&p| p != c).map(|p| confusion[c][p]).sum();
            let denom = 2 * tp + fp + fneg;
            if denom > 0 {
                f1 += 2.0 * tp as f64 / denom as f64;
            }
        }
        Ok(Validation {
            loss: loss / idx.len() as f64,
            f1: Some(f1 / k as f64),
        })
    }

    fn is_classifier(&self) -> bool {
        true
    }

    /// Glorot-uniform weights, zero biases.
    fn initial_point(&self, seed: u64) -> Vec<f64> {
        let mut r = rng::rng(rng::derive(seed, self.spec.init_seed));
        let mut theta = vec![0.0; self.dim()];
        for l in 0..self.layers() {
            let (n_in, n_out) = (self.spec.widths[l], self.spec.widths[l + 1]);
            let limit = (6.0 / (n_in + n_out) as f64).sqrt();
            for w in &mut theta[self.offsets[l]..self.offsets[l] + n_in * n_out] {
                *w = r.random_range(-limit..limit);
            }
        }
        theta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{finite_diff_gradient, synth_dataset, DatasetSpec};

    fn blobs(n: usize) -> Dataset {
        synth_dataset(
            &DatasetSpec::Blobs {
                n,
                dim: 4,
                classes: 3,
                spread: 0.8,
                val_frac: 0.2,
            },
            21,
        )
        .unwrap()
    }

    fn spec(activation: Activation, reduction: Reduction) -> MiniMlpSpec {
        MiniMlpSpec {
            widths: vec![4, 8, 3],
            activation,
            reduction,
            init_seed: 0,
            batch_size: None,
        }
    }

    #[test]
    fn gradient_matches_finite_differences_on_random_coordinates() {
        let net = make_mlp(spec(Activation::Tanh, Reduction::Mean), blobs(40)).unwrap();
        let mut r = rng::rng(8);
        let theta: Vec<f64> = (0..net.dim()).map(|_| r.random_range(-1.0..1.0)).collect();
        let g = net.eval(&theta).unwrap().grad;
        let h = 1e-5;
        for _ in 0..50 {
            let i = r.random_range(0..net.dim());
            let mut p = theta.clone();
            p[i] += h;
            let up = net.eval(&p).unwrap().loss;
            p[i] -= 2.0 * h;
            let down = net.eval(&p).unwrap().loss;
            let fd = (up - down) / (2.0 * h);
            let rel = (g[i] - fd).abs() / g[i].abs().max(fd.abs()).max(1e-6);
            assert!(rel < 1e-4, "coordinate {i}: {} vs {fd}", g[i]);
        }
        let fd = finite_diff_gradient(&net, &theta, h).unwrap();
        assert!(crate::models::relative_error(&g, &fd, 1e-8) < 1e-4);
    }

    #[test]
    fn duplicate_point_doubles_contribution_under_sum() {
        let base = blobs(20);
        let extra = base.train[0];
        let mut features = base.features.clone();
        features.extend_from_slice(base.row(extra));
        let mut labels = base.labels.clone();
        labels.push(base.labels[extra]);
        let mut dup = base.clone();
        dup.n += 1;
        dup.features = features;
        dup.labels = labels;
        dup.train.push(base.n);

        let single = {
            let mut d = base.clone();
            d.train = vec![extra];
            d
        };
        let s = spec(Activation::Tanh, Reduction::Sum);
        let a = make_mlp(s.clone(), base).unwrap();
        let b = make_mlp(s.clone(), dup).unwrap();
        let c = make_mlp(s, single).unwrap();
        let theta = a.initial_point(3);
        let ga = a.eval(&theta).unwrap().grad;
        let gb = b.eval(&theta).unwrap().grad;
        let gc = c.eval(&theta).unwrap().grad;
        for i in 0..ga.len() {
            assert!((gb[i] - ga[i] - gc[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_network_has_identical_logits() {
        let net = make_mlp(spec(Activation::Relu, Reduction::Mean), blobs(20)).unwrap();
        let theta = vec![0.0; net.dim()];
        let z = net.logits(&theta, net.data().row(0)).unwrap();
        assert!(z.iter().all(|v| *v == z[0]));
        let e = net.eval(&theta).unwrap();
        assert!((e.loss - 3f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn spec_errors() {
        let mut s = spec(Activation::Tanh, Reduction::Mean);
        s.widths = vec![4, 3];
        assert!(matches!(make_mlp(s, blobs(20)), Err(ModelError::Config(_))));
        let mut s = spec(Activation::Tanh, Reduction::Mean);
        s.widths = vec![5, 8, 3];
        assert!(matches!(
            make_mlp(s, blobs(20)),
            Err(ModelError::Shape { .. })
        ));
        let mut s = spec(Activation::Tanh, Reduction::Mean);
        s.widths = vec![4, 400, 400, 3];
        assert!(matches!(make_mlp(s, blobs(20)), Err(ModelError::Config(_))));
    }

    #[test]
    fn minibatches_are_seeded() {
        let mut s = spec(Activation::Tanh, Reduction::Mean);
        s.batch_size = Some(8);
        let net = make_mlp(s, blobs(60)).unwrap();
        let theta = net.initial_point(1);
        let a = net.eval_step(&theta, 3).unwrap();
        let b = net.eval_step(&theta, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.loss, net.eval(&theta).unwrap().loss);
    }
}
