//! The EVE update: two momenta mixed by `beta3`, two coupled residual
//! velocities, and two learning rates whose contributions are averaged.
//!
//! One step runs, in order:
//!
//! 1. classify the gradient as sparse or dense,
//! 2. update the short- and long-term momenta and mix them,
//! 3. update `v1` from the old `v2`, then `v2` from the new `v1`,
//! 4. compute the two effective rates from the new velocities at the incoming `t`,
//! 5. move `theta` by `-m * (a1 + a2) / 2`.
//!
//! The bias-correction numerators are used exactly as the method defines
//! them, including the mixed `sqrt(1 - alpha^t) / (1 - beta1^t)` factor of the
//! primary rate and the `(1 - beta2)` coefficient on the dense `v1` update.
//! The dense `v1` update is therefore not a convex combination unless
//! `alpha + (1 - beta2) = 1`; the velocities stay bounded because `alpha < 1`.

use serde::{Deserialize, Serialize};

use super::{check_finite, check_len, GradientMode, OptimError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EveConfig {
    /// Primary learning rate.
    pub lr1: f64,
    /// Secondary learning rate.
    pub lr2: f64,
    /// Short-term momentum decay.
    pub beta1: f64,
    /// Long-term momentum decay.
    pub beta2: f64,
    /// Weight of the short-term momentum in the mix.
    pub beta3: f64,
    /// Velocity decay.
    pub alpha: f64,
    pub epsilon: f64,
    /// Entries with `|g_i| <= zero_tol` count as zero for the sparsity test.
    pub zero_tol: f64,
    /// A gradient is sparse when strictly more than this fraction of its
    /// entries are zero.
    pub sparse_frac: f64,
}

impl Default for EveConfig {
    fn default() -> Self {
        Self {
            lr1: 1e-3,
            lr2: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            beta3: 0.5,
            alpha: 0.999,
            epsilon: 1e-8,
            zero_tol: 1e-12,
            sparse_frac: 0.5,
        }
    }
}

impl EveConfig {
    pub fn with_rates(lr1: f64, lr2: f64) -> Self {
        Self {
            lr1,
            lr2,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), OptimError> {
        let open_unit = [
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("beta3", self.beta3),
            ("alpha", self.alpha),
        ];
        for (name, x) in open_unit {
            if !(x > 0.0 && x < 1.0) {
                return Err(OptimError::Config(format!(
                    "{name} must lie in (0, 1), got {x}"
                )));
            }
        }
        for (name, x) in [
            ("lr1", self.lr1),
            ("lr2", self.lr2),
            ("epsilon", self.epsilon),
        ] {
            if !(x > 0.0 && x.is_finite()) {
                return Err(OptimError::Config(format!(
                    "{name} must be positive, got {x}"
                )));
            }
        }
        if !(self.zero_tol >= 0.0 && self.zero_tol.is_finite()) {
            return Err(OptimError::Config(format!(
                "zero_tol must be nonnegative, got {}",
                self.zero_tol
            )));
        }
        if !(0.0..=1.0).contains(&self.sparse_frac) {
            return Err(OptimError::Config(format!(
                "sparse_frac must lie in [0, 1], got {}",
                self.sparse_frac
            )));
        }
        Ok(())
    }
}

/// Per-parameter optimizer state. `t` is the index of the next step to be
/// applied, so a fresh state has `t = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EveState {
    pub m_s: Vec<f64>,
    pub m_l: Vec<f64>,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    pub t: u64,
}

impl EveState {
    pub fn new(dim: usize) -> Self {
        Self {
            m_s: vec![0.0; dim],
            m_l: vec![0.0; dim],
            v1: vec![0.0; dim],
            v2: vec![0.0; dim],
            t: 1,
        }
    }

    pub fn dim(&self) -> usize {
        self.m_s.len()
    }

    pub fn validate(&self, dim: usize) -> Result<(), OptimError> {
        check_len("m_s", dim, self.m_s.len())?;
        check_len("m_l", dim, self.m_l.len())?;
        check_len("v1", dim, self.v1.len())?;
        check_len("v2", dim, self.v2.len())?;
        if self.t == 0 {
            return Err(OptimError::Precondition(
                "step counter t must be >= 1".into(),
            ));
        }
        check_velocity("v1", &self.v1)?;
        check_velocity("v2", &self.v2)
    }
}

fn check_velocity(name: &str, v: &[f64]) -> Result<(), OptimError> {
    // NaN fails the `>= 0` test as well.
    match v.iter().position(|x| !(*x >= 0.0)) {
        Some(i) => Err(OptimError::StateCorruption(format!(
            "{name}[{i}] = {} is not a nonnegative velocity",
            v[i]
        ))),
        None => Ok(()),
    }
}

pub fn classify_gradient(g: &[f64], cfg: &EveConfig) -> Result<GradientMode, OptimError> {
    if g.is_empty() {
        return Err(OptimError::EmptyGradient);
    }
    check_finite(g)?;
    let zeros = g.iter().filter(|x| x.abs() <= cfg.zero_tol).count();
    let frac = zeros as f64 / g.len() as f64;
    Ok(if frac > cfg.sparse_frac {
        GradientMode::Sparse
    } else {
        GradientMode::Dense
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Momenta {
    pub m_s: Vec<f64>,
    pub m_l: Vec<f64>,
    /// `beta3 * m_s + (1 - beta3) * m_l`
    pub m: Vec<f64>,
}

pub fn update_momenta(state: &EveState, g: &[f64], cfg: &EveConfig) -> Result<Momenta, OptimError> {
    let n = g.len();
    check_len("m_s", n, state.m_s.len())?;
    check_len("m_l", n, state.m_l.len())?;
    check_finite(g)?;
    let (b1, b2, b3) = (cfg.beta1, cfg.beta2, cfg.beta3);
    let m_s: Vec<f64> = state
        .m_s
        .iter()
        .zip(g)
        .map(|(m, g)| b1 * m + (1.0 - b1) * g)
        .collect();
    let m_l: Vec<f64> = state
        .m_l
        .iter()
        .zip(g)
        .map(|(m, g)| b2 * m + (1.0 - b2) * g)
        .collect();
    let m = m_s
        .iter()
        .zip(&m_l)
        .map(|(s, l)| b3 * s + (1.0 - b3) * l)
        .collect();
    Ok(Momenta { m_s, m_l, m })
}

/// Sequential velocity update: `v1` uses the incoming `v2`, then `v2` uses the
/// freshly updated `v1`.
pub fn update_velocities(
    state: &EveState,
    g: &[f64],
    mode: GradientMode,
    cfg: &EveConfig,
) -> Result<(Vec<f64>, Vec<f64>), OptimError> {
    let n = g.len();
    check_len("v1", n, state.v1.len())?;
    check_len("v2", n, state.v2.len())?;
    check_velocity("v1", &state.v1)?;
    check_velocity("v2", &state.v2)?;
    let alpha = cfg.alpha;
    let coef = match mode {
        GradientMode::Sparse => 1.0 - alpha,
        GradientMode::Dense => 1.0 - cfg.beta2,
    };
    let mut v1 = Vec::with_capacity(n);
    let mut v2 = Vec::with_capacity(n);
    for i in 0..n {
        let r1 = g[i] - state.v2[i].sqrt();
        let nv1 = alpha * state.v1[i] + coef * r1 * r1;
        let r2 = g[i] - nv1.sqrt();
        let nv2 = alpha * state.v2[i] + (1.0 - alpha) * r2 * r2;
        v1.push(nv1);
        v2.push(nv2);
    }
    Ok((v1, v2))
}

fn pow_t(base: f64, t: u64) -> f64 {
    match i32::try_from(t) {
        Ok(k) => base.powi(k),
        Err(_) => base.powf(t as f64),
    }
}

/// Element-wise effective rates `(a1, a2)` at step `t`.
pub fn effective_rates(
    t: u64,
    v1: &[f64],
    v2: &[f64],
    mode: GradientMode,
    cfg: &EveConfig,
) -> Result<(Vec<f64>, Vec<f64>), OptimError> {
    if t == 0 {
        return Err(OptimError::Precondition(
            "effective rates need t >= 1; bias corrections are 0/0 at t = 0".into(),
        ));
    }
    check_len("v2", v1.len(), v2.len())?;
    check_velocity("v1", v1)?;
    check_velocity("v2", v2)?;
    let alpha_t = pow_t(cfg.alpha, t);
    let beta1_t = pow_t(cfg.beta1, t);
    let beta2_t = pow_t(cfg.beta2, t);
    let lr1_t = cfg.lr1 * (1.0 - alpha_t).sqrt() / (1.0 - beta1_t);
    let lr2_t = match mode {
        GradientMode::Sparse => cfg.lr2 * (1.0 - beta2_t).sqrt() / (1.0 - beta1_t),
        GradientMode::Dense => cfg.lr2 * (1.0 - alpha_t).sqrt() / (1.0 - beta2_t),
    };
    let a1 = v2
        .iter()
        .map(|v| lr1_t / (v.sqrt() + cfg.epsilon))
        .collect();
    let a2 = v1
        .iter()
        .map(|v| lr2_t / (v.sqrt() + cfg.epsilon))
        .collect();
    Ok((a1, a2))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EveStep {
    pub theta: Vec<f64>,
    pub state: EveState,
    pub mode: GradientMode,
    /// Some entry of `theta` became NaN or infinite.
    pub diverged: bool,
}

pub fn eve_step(
    theta: &[f64],
    g: &[f64],
    state: &EveState,
    cfg: &EveConfig,
) -> Result<EveStep, OptimError> {
    check_len("gradient", theta.len(), g.len())?;
    state.validate(theta.len())?;
    let mode = classify_gradient(g, cfg)?;
    let Momenta { m_s, m_l, m } = update_momenta(state, g, cfg)?;
    let (v1, v2) = update_velocities(state, g, mode, cfg)?;
    let (a1, a2) = effective_rates(state.t, &v1, &v2, mode, cfg)?;
    let new_theta: Vec<f64> = (0..theta.len())
        .map(|i| theta[i] - m[i] * (a1[i] + a2[i]) / 2.0)
        .collect();
    let diverged = new_theta.iter().any(|x| !x.is_finite());
    Ok(EveStep {
        theta: new_theta,
        state: EveState {
            m_s,
            m_l,
            v1,
            v2,
            t: state.t + 1,
        },
        mode,
        diverged,
    })
}
