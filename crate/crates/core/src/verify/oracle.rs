//! Naive transcription of the EVE algorithm, one scalar at a time.
//!
//! Shares only the state and config types with `optim`; every arithmetic
//! step is written out again here so the two implementations can be checked
//! against each other.

use crate::optim::{EveConfig, EveState, OptimError};

pub fn oracle_step(
    theta: &[f64],
    g: &[f64],
    state: &EveState,
    cfg: &EveConfig,
) -> Result<(Vec<f64>, EveState), OptimError> {
    let n = theta.len();
    if g.len() != n {
        return Err(OptimError::Shape {
            what: "gradient",
            expected: n,
            got: g.len(),
        });
    }
    if n == 0 {
        return Err(OptimError::EmptyGradient);
    }
    for (what, v) in [
        ("m_s", &state.m_s),
        ("m_l", &state.m_l),
        ("v1", &state.v1),
        ("v2", &state.v2),
    ] {
        if v.len() != n {
            return Err(OptimError::Shape {
                what,
                expected: n,
                got: v.len(),
            });
        }
    }
    if state.t == 0 {
        return Err(OptimError::Precondition("t must be >= 1".into()));
    }
    for i in 0..n {
        if !g[i].is_finite() {
            return Err(OptimError::InvalidGradient {
                index: i,
                value: g[i],
            });
        }
        if !(state.v1[i] >= 0.0) || !(state.v2[i] >= 0.0) {
            return Err(OptimError::StateCorruption(format!(
                "negative velocity at {i}"
            )));
        }
    }

    // Sparse when strictly more than sparse_frac of the entries are zero.
    let mut zeros = 0usize;
    for i in 0..n {
        if g[i].abs() <= cfg.zero_tol {
            zeros += 1;
        }
    }
    let sparse = (zeros as f64) / (n as f64) > cfg.sparse_frac;

    // Bias-corrected rates at the incoming step count.
    let t = state.t as f64;
    let lr1_t = cfg.lr1 * (1.0 - cfg.alpha.powf(t)).sqrt() / (1.0 - cfg.beta1.powf(t));
    let lr2_t = if sparse {
        cfg.lr2 * (1.0 - cfg.beta2.powf(t)).sqrt() / (1.0 - cfg.beta1.powf(t))
    } else {
        cfg.lr2 * (1.0 - cfg.alpha.powf(t)).sqrt() / (1.0 - cfg.beta2.powf(t))
    };

    let mut next = EveState {
        m_s: vec![0.0; n],
        m_l: vec![0.0; n],
        v1: vec![0.0; n],
        v2: vec![0.0; n],
        t: state.t + 1,
    };
    let mut out = vec![0.0; n];
    for i in 0..n {
        // Momenta.
        let m_s = cfg.beta1 * state.m_s[i] + (1.0 - cfg.beta1) * g[i];
        let m_l = cfg.beta2 * state.m_l[i] + (1.0 - cfg.beta2) * g[i];
        let m = cfg.beta3 * m_s + (1.0 - cfg.beta3) * m_l;

        // Residual velocities: v1 from the old v2, then v2 from the new v1.
        let v1 = if sparse {
            cfg.alpha * state.v1[i] + (1.0 - cfg.alpha) * (g[i] - state.v2[i].sqrt()).powi(2)
        } else {
            cfg.alpha * state.v1[i] + (1.0 - cfg.beta2) * (g[i] - state.v2[i].sqrt()).powi(2)
        };
        let v2 = cfg.alpha * state.v2[i] + (1.0 - cfg.alpha) * (g[i] - v1.sqrt()).powi(2);

        // Parameter update, averaging both rate terms.
        out[i] = theta[i]
            - 0.5 * (m * lr1_t / (v2.sqrt() + cfg.epsilon) + m * lr2_t / (v1.sqrt() + cfg.epsilon));

        next.m_s[i] = m_s;
        next.m_l[i] = m_l;
        next.v1[i] = v1;
        next.v2[i] = v2;
    }
    Ok((out, next))
}
