//! Textbook comparators: plain SGD, heavy-ball momentum, Adam and AMSGrad.

use serde::{Deserialize, Serialize};

use super::{check_finite, check_len, OptimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    Sgd,
    Momentum,
    Adam,
    AmsGrad,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Sgd => "sgd",
            BaselineKind::Momentum => "momentum",
            BaselineKind::Adam => "adam",
            BaselineKind::AmsGrad => "amsgrad",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub lr: f64,
    /// Heavy-ball coefficient, used by `Momentum` only.
    pub momentum: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            momentum: 0.9,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl BaselineConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }

    pub fn validate(&self, kind: BaselineKind) -> Result<(), OptimError> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(OptimError::Config(format!(
                "lr must be positive, got {}",
                self.lr
            )));
        }
        let decays: &[(&str, f64)] = match kind {
            BaselineKind::Sgd => &[],
            BaselineKind::Momentum => &[("momentum", self.momentum)],
            BaselineKind::Adam | BaselineKind::AmsGrad => {
                &[("beta1", self.beta1), ("beta2", self.beta2)]
            }
        };
        for (name, x) in decays {
            if !(*x > 0.0 && *x < 1.0) {
                return Err(OptimError::Config(format!(
                    "{name} must lie in (0, 1), got {x}"
                )));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(OptimError::Config(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Moment buffers shared by all baselines. SGD ignores them; heavy-ball keeps
/// its velocity in `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    /// Running element-wise maximum of `v` (AMSGrad).
    pub v_max: Vec<f64>,
    /// Index of the next step, starting at 1.
    pub t: u64,
}

impl BaselineState {
    pub fn new(dim: usize) -> Self {
        Self {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            v_max: vec![0.0; dim],
            t: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineStep {
    pub theta: Vec<f64>,
    pub state: BaselineState,
    pub diverged: bool,
}

pub fn baseline_step(
    kind: BaselineKind,
    theta: &[f64],
    g: &[f64],
    state: &BaselineState,
    cfg: &BaselineConfig,
) -> Result<BaselineStep, OptimError> {
    let n = theta.len();
    check_len("gradient", n, g.len())?;
    check_len("m", n, state.m.len())?;
    check_len("v", n, state.v.len())?;
    check_len("v_max", n, state.v_max.len())?;
    if g.is_empty() {
        return Err(OptimError::EmptyGradient);
    }
    check_finite(g)?;
    if state.t == 0 {
        return Err(OptimError::Precondition(
            "step counter t must be >= 1".into(),
        ));
    }
    let mut next = state.clone();
    let mut out = theta.to_vec();
    match kind {
        BaselineKind::Sgd => {
            for i in 0..n {
                out[i] -= cfg.lr * g[i];
            }
        }
        BaselineKind::Momentum => {
            for i in 0..n {
                next.m[i] = cfg.momentum * state.m[i] + g[i];
                out[i] -= cfg.lr * next.m[i];
            }
        }
        BaselineKind::Adam | BaselineKind::AmsGrad => {
            let t = state.t as f64;
            let bc1 = 1.0 - cfg.beta1.powf(t);
            let bc2 = 1.0 - cfg.beta2.powf(t);
            for i in 0..n {
                next.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g[i];
                next.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                let second = if kind == BaselineKind::AmsGrad {
                    next.v_max[i] = state.v_max[i].max(next.v[i]);
                    next.v_max[i]
                } else {
                    next.v[i]
                };
                let m_hat = next.m[i] / bc1;
                let v_hat = second / bc2;
                out[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
            }
        }
    }
    next.t = state.t + 1;
    let diverged = out.iter().any(|x| !x.is_finite());
    Ok(BaselineStep {
        theta: out,
        state: next,
        diverged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sgd_step() {
        let c = BaselineConfig::with_lr(0.1);
        let out = baseline_step(
            BaselineKind::Sgd,
            &[1.0],
            &[2.0],
            &BaselineState::new(1),
            &c,
        )
        .unwrap();
        assert!((out.theta[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step() {
        let c = BaselineConfig::default();
        let out = baseline_step(
            BaselineKind::Adam,
            &[0.0],
            &[1.0],
            &BaselineState::new(1),
            &c,
        )
        .unwrap();
        // m_hat = g, v_hat = g^2
        let expected = -0.001 * 1.0 / (1.0 + 1e-8);
        assert!((out.theta[0] - expected).abs() < 1e-15);
        assert!((out.theta[0] + 0.001).abs() < 1e-10);
    }

    #[test]
    fn heavy_ball_accumulates() {
        let c = BaselineConfig {
            lr: 0.5,
            momentum: 0.5,
            ..Default::default()
        };
        let s0 = BaselineState::new(1);
        let s1 = baseline_step(BaselineKind::Momentum, &[0.0], &[1.0], &s0, &c).unwrap();
        let s2 = baseline_step(BaselineKind::Momentum, &s1.theta, &[1.0], &s1.state, &c).unwrap();
        assert_eq!(s1.theta[0], -0.5);
        assert_eq!(s2.state.m[0], 1.5);
        assert_eq!(s2.theta[0], -1.25);
    }

    #[test]
    fn amsgrad_max_moment_is_nondecreasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let c = BaselineConfig::default();
        let mut theta = vec![0.0; 6];
        let mut st = BaselineState::new(6);
        for _ in 0..100 {
            let g: Vec<f64> = (0..6).map(|_| rng.random_range(-3.0..3.0)).collect();
            let out = baseline_step(BaselineKind::AmsGrad, &theta, &g, &st, &c).unwrap();
            for i in 0..6 {
                assert!(out.state.v_max[i] >= st.v_max[i]);
                assert!(out.state.v_max[i] >= out.state.v[i]);
            }
            theta = out.theta;
            st = out.state;
        }
    }

    #[test]
    fn rejects_bad_input() {
        let c = BaselineConfig::default();
        let st = BaselineState::new(1);
        assert!(baseline_step(BaselineKind::Adam, &[0.0], &[f64::NAN], &st, &c).is_err());
        assert!(baseline_step(BaselineKind::Adam, &[0.0, 1.0], &[1.0], &st, &c).is_err());
        assert!(BaselineConfig::with_lr(0.0)
            .validate(BaselineKind::Sgd)
            .is_err());
        let bad = BaselineConfig {
            beta2: 1.0,
            ..Default::default()
        };
        assert!(bad.validate(BaselineKind::Adam).is_err());
        assert!(bad.validate(BaselineKind::Sgd).is_ok());
    }
}
