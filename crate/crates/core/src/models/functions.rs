//! Analytic test surfaces with closed-form gradients.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{check_dim, Evaluation, ModelError, Objective, Optimum};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    /// `½ θᵀAθ − bᵀθ` with `A` symmetric positive definite.
    Quadratic {
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
    },
    Rosenbrock {
        dim: usize,
    },
    Rastrigin {
        dim: usize,
    },
    Beale,
}

pub fn make_test_function(kind: TestFunction) -> Result<Box<dyn Objective>, ModelError> {
    Ok(match kind {
        TestFunction::Quadratic { a, b } => Box::new(Quadratic::new(a, b)?),
        TestFunction::Rosenbrock { dim } => Box::new(Rosenbrock::new(dim)?),
        TestFunction::Rastrigin { dim } => Box::new(Rastrigin::new(dim)?),
        TestFunction::Beale => Box::new(Beale),
    })
}

/// Lower Cholesky factor of a row-major `n × n` matrix, or `None` if it is
/// not positive definite.
fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i * n + k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k * n + i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i * n + i];
    }
    x
}

#[derive(Debug, Clone)]
pub struct Quadratic {
    dim: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    optimum: Optimum,
    /// Initial points are drawn from `U[-init_scale, init_scale]^dim`.
    pub init_scale: f64,
}

impl Quadratic {
    pub fn new(a: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self, ModelError> {
        let n = b.len();
        if n == 0 {
            return Err(ModelError::Config(
                "quadratic needs at least one dimension".into(),
            ));
        }
        if a.len() != n || a.iter().any(|row| row.len() != n) {
            return Err(ModelError::Config(format!(
                "A must be {n} x {n} to match b"
            )));
        }
        let flat: Vec<f64> = a.into_iter().flatten().collect();
        for i in 0..n {
            for j in 0..i {
                let (x, y) = (flat[i * n + j], flat[j * n + i]);
                if (x - y).abs() > 1e-12 * x.abs().max(y.abs()).max(1.0) {
                    return Err(ModelError::Config(format!(
                        "A is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let l = cholesky(&flat, n)
            .ok_or_else(|| ModelError::Config("A is not positive definite".into()))?;
        let x = cholesky_solve(&l, n, &b);
        let value = -0.5 * x.iter().zip(&b).map(|(x, b)| x * b).sum::<f64>();
        Ok(Self {
            dim: n,
            a: flat,
            b,
            optimum: Optimum {
                theta: Some(x),
                value,
            },
            init_scale: 0.5,
        })
    }

    /// `Q diag(λ) Qᵀ` with a seeded random rotation `Q` and eigenvalues spaced
    /// evenly over `[min_eig, max_eig]`; `b = 0`.
    pub fn random_spd(
        dim: usize,
        min_eig: f64,
        max_eig: f64,
        seed: u64,
    ) -> Result<Self, ModelError> {
        if dim == 0 || !(min_eig > 0.0) || !(max_eig >= min_eig) {
            return Err(ModelError::Config(format!(
                "random quadratic needs dim > 0 and 0 < min_eig <= max_eig, got {dim}, {min_eig}, {max_eig}"
            )));
        }
        let mut r = rng::rng(seed);
        // Gram-Schmidt on a Gaussian matrix gives the columns of Q.
        let mut q: Vec<Vec<f64>> = Vec::with_capacity(dim);
        while q.len() < dim {
            let mut v: Vec<f64> = (0..dim).map(|_| r.sample(StandardNormal)).collect();
            for u in &q {
                let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                for (vi, ui) in v.iter_mut().zip(u) {
                    *vi -= d * ui;
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-8 {
                v.iter_mut().for_each(|x| *x /= norm);
                q.push(v);
            }
        }
        let eig: Vec<f64> = (0..dim)
            .map(|k| {
                if dim == 1 {
                    max_eig
                } else {
                    min_eig + (max_eig - min_eig) * k as f64 / (dim - 1) as f64
                }
            })
            .collect();
        let mut a = vec![vec![0.0; dim]; dim];
        for i in 0..dim {
            for j in 0..=i {
                let s: f64 = (0..dim).map(|k| q[k][i] * eig[k] * q[k][j]).sum();
                a[i][j] = s;
                a[j][i] = s;
            }
        }
        Self::new(a, vec![0.0; dim])
    }

    pub fn with_init_scale(mut self, scale: f64) -> Self {
        self.init_scale = scale;
        self
    }

    pub fn matrix(&self) -> &[f64] {
        &self.a
    }
}

impl Objective for Quadratic {
    fn name(&self) -> &str {
        "quadratic"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, theta: &[f64]) -> Result<Evaluation, ModelError> {
        check_dim(self.dim, theta)?;
        let n = self.dim;
        let mut grad = vec![0.0; n];
        let mut loss = 0.0;
        for i in 0..n {
            let row = &self.a[i * n..(i + 1) * n];
            let ax: f64 = row.iter().zip(theta).map(|(a, x)| a * x).sum();
            grad[i] = ax - self.b[i];
            loss += 0.5 * theta[i] * ax - self.b[i] * theta[i];
        }
        Ok(Evaluation { loss, grad })
    }

    fn optimum(&self) -> Option<Optimum> {
        Some(self.optimum.clone())
    }

    fn initial_point(&self, seed: u64) -> Vec<f64> {
        let mut r = rng::rng(seed);
        (0..self.dim)
            .map(|_| r.random_range(-self.init_scale..=self.init_scale))
            .collect()
    }
}

/// `Σ 100 (x_{i+1} − x_i²)² + (1 − x_i)²`, minimum 0 at all-ones.
#[derive(Debug, Clone)]
pub struct Rosenbrock {
    dim: usize,
}

impl Rosenbrock {
    pub fn new(dim: usize) -> Result<Self, ModelError> {
        if dim < 2 {
            return Err(ModelError::Config(format!(
                "Rosenbrock needs dim >= 2, got {dim}"
            )));
        }
        Ok(Self { dim })
    }
}

impl Objective for Rosenbrock {
    fn name(&self) -> &str {
        "rosenbrock"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> Result<Evaluation, ModelError> {
        check_dim(self.dim, x)?;
        let mut loss = 0.0;
        let mut grad = vec![0.0; self.dim];
        for i in 0..self.dim - 1 {
            let r = x[i + 1] - x[i] * x[i];
            let s = 1.0 - x[i];
            loss += 100.0 * r * r + s * s;
            grad[i] += -400.0 * x[i] * r - 2.0 * s;
            grad[i + 1] += 200.0 * r;
        }
        Ok(Evaluation { loss, grad })
    }

    fn optimum(&self) -> Option<Optimum> {
        Some(Optimum {
            theta: Some(vec![1.0; self.dim]),
            value: 0.0,
        })
    }

    fn initial_point(&self, _seed: u64) -> Vec<f64> {
        (0..self.dim)
            .map(|i| if i % 2 == 0 { -1.2 } else { 1.0 })
            .collect()
    }
}

/// `10 d + Σ x_i² − 10 cos(2π x_i)`, minimum 0 at the origin.
#[derive(Debug, Clone)]
pub struct Rastrigin {
    dim: usize,
}

impl Rastrigin {
    pub fn new(dim: usize) -> Result<Self, ModelError> {
        if dim == 0 {
            return Err(ModelError::Config("Rastrigin needs dim >= 1".into()));
        }
        Ok(Self { dim })
    }
}

impl Objective for Rastrigin {
    fn name(&self) -> &str {
        "rastrigin"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> Result<Evaluation, ModelError> {
        check_dim(self.dim, x)?;
        let mut loss = 10.0 * self.dim as f64;
        let grad = x
            .iter()
            .map(|&xi| {
                loss += xi * xi - 10.0 * (2.0 * PI * xi).cos();
                2.0 * xi + 20.0 * PI * (2.0 * PI * xi).sin()
            })
            .collect();
        Ok(Evaluation { loss, grad })
    }

    fn optimum(&self) -> Option<Optimum> {
        Some(Optimum {
            theta: Some(vec![0.0; self.dim]),
            value: 0.0,
        })
    }

    fn initial_point(&self, seed: u64) -> Vec<f64> {
        let mut r = rng::rng(seed);
        (0..self.dim)
            .map(|_| r.random_range(-5.12..=5.12))
            .collect()
    }
}

/// Two-dimensional Beale function, minimum 0 at (3, 0.5).
#[derive(Debug, Clone, Copy)]
pub struct Beale;

impl Objective for Beale {
    fn name(&self) -> &str {
        "beale"
    }

    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, p: &[f64]) -> Result<Evaluation, ModelError> {
        check_dim(2, p)?;
        let (x, y) = (p[0], p[1]);
        let terms = [(1.5, 1), (2.25, 2), (2.625, 3)];
        let mut loss = 0.0;
        let mut gx = 0.0;
        let mut gy = 0.0;
        for (c, k) in terms {
            let yk = y.powi(k);
            let r = c - x + x * yk;
            loss += r * r;
            gx += 2.0 * r * (yk - 1.0);
            gy += 2.0 * r * x * k as f64 * y.powi(k - 1);
        }
        Ok(Evaluation {
            loss,
            grad: vec![gx, gy],
        })
    }

    fn optimum(&self) -> Option<Optimum> {
        Some(Optimum {
            theta: Some(vec![3.0, 0.5]),
            value: 0.0,
        })
    }

    fn initial_point(&self, _seed: u64) -> Vec<f64> {
        vec![1.0, 1.0]
    }
}
