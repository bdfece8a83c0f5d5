use serde::Serialize;

use super::oracle::oracle_step;
use crate::models::{ModelError, Objective};
use crate::optim::{eve_step, EveConfig, EveState, GradientMode, OptimError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryDiff {
    pub steps: usize,
    pub max_abs_param_diff: f64,
    pub max_abs_state_diff: f64,
    /// Branch counts seen by the library stepper, summed over seeds.
    pub sparse_steps: usize,
    pub dense_steps: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum TrajectoryError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Optim(#[from] OptimError),
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Runs the library stepper and the scalar oracle side by side from the
/// objective's initial point for each seed. Each implementation evaluates the
/// gradient at its own iterate.
pub fn trajectory_equal(
    objective: &dyn Objective,
    cfg: &EveConfig,
    steps: usize,
    seeds: &[u64],
) -> Result<TrajectoryDiff, TrajectoryError> {
    let mut diff = TrajectoryDiff {
        steps,
        max_abs_param_diff: 0.0,
        max_abs_state_diff: 0.0,
        sparse_steps: 0,
        dense_steps: 0,
    };
    let dim = objective.dim();
    for &seed in seeds {
        let mut lib_theta = objective.initial_point(seed);
        let mut ora_theta = lib_theta.clone();
        let mut lib_state = EveState::new(dim);
        let mut ora_state = EveState::new(dim);
        for step in 0..steps as u64 {
            let lib_g = objective.eval_step(&lib_theta, step)?.grad;
            let ora_g = objective.eval_step(&ora_theta, step)?.grad;
            let out = eve_step(&lib_theta, &lib_g, &lib_state, cfg)?;
            let (ot, os) = oracle_step(&ora_theta, &ora_g, &ora_state, cfg)?;
            match out.mode {
                GradientMode::Sparse => diff.sparse_steps += 1,
                GradientMode::Dense => diff.dense_steps += 1,
            }
            lib_theta = out.theta;
            lib_state = out.state;
            ora_theta = ot;
            ora_state = os;
            diff.max_abs_param_diff = diff
                .max_abs_param_diff
                .max(max_abs_diff(&lib_theta, &ora_theta));
            let state_diff = [
                max_abs_diff(&lib_state.m_s, &ora_state.m_s),
                max_abs_diff(&lib_state.m_l, &ora_state.m_l),
                max_abs_diff(&lib_state.v1, &ora_state.v1),
                max_abs_diff(&lib_state.v2, &ora_state.v2),
            ]
            .into_iter()
            .fold(0.0f64, f64::max);
            diff.max_abs_state_diff = diff.max_abs_state_diff.max(state_diff);
        }
    }
    Ok(diff)
}
