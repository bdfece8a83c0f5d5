use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, OptimizerKind, RunCell};
use super::HarnessError;
use crate::models::Objective;
use crate::optim::{Baseline, Eve, GradientMode, Optimizer};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValPoint {
    pub step: usize,
    pub loss: f64,
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub cell: RunCell,
    pub optimizer: OptimizerKind,
    pub objective: String,
    pub classifier: bool,
    /// Mini-batch loss at the iterate before each update.
    pub train_loss: Vec<f64>,
    /// Held-out loss every `eval_every` steps and at the final iterate.
    pub val: Vec<ValPoint>,
    pub diverged: bool,
    pub diverged_at: Option<usize>,
    /// Set when the run could not be carried out; the series are then empty.
    pub error: Option<String>,
    pub seconds: Option<f64>,
    /// SHA-256 of the final parameters as little-endian `f64` bytes.
    pub digest: String,
    pub sparse_steps: usize,
    pub dense_steps: usize,
}

impl RunRecord {
    /// The record of a cell that could not be run.
    pub fn failed(cfg: &ExperimentConfig, cell: RunCell, err: HarnessError) -> Self {
        Self {
            cell,
            optimizer: cfg.optimizer,
            objective: cfg.objective.name().to_string(),
            classifier: false,
            train_loss: vec![],
            val: vec![],
            diverged: false,
            diverged_at: None,
            error: Some(err.to_string()),
            seconds: None,
            digest: String::new(),
            sparse_steps: 0,
            dense_steps: 0,
        }
    }

    /// The last recorded validation loss; for a diverged run this is the
    /// loss at the divergence step.
    pub fn final_loss(&self) -> Option<f64> {
        self.val.last().map(|v| v.loss)
    }

    pub fn best_loss(&self) -> Option<f64> {
        self.val
            .iter()
            .map(|v| v.loss)
            .filter(|x| x.is_finite())
            .reduce(f64::min)
    }
}

fn digest(theta: &[f64]) -> String {
    let mut h = Sha256::new();
    for x in theta {
        h.update(x.to_le_bytes());
    }
    hex::encode(h.finalize())
}

fn make_optimizer(
    cfg: &ExperimentConfig,
    cell: &RunCell,
    dim: usize,
) -> Result<Box<dyn Optimizer>, HarnessError> {
    Ok(match cfg.optimizer.baseline() {
        None => Box::new(Eve::new(cfg.eve_config(cell), dim)?),
        Some(kind) => Box::new(Baseline::new(kind, cfg.baseline_config(cell), dim)?),
    })
}

/// Trains one cell. Divergence (loss above the threshold or non-finite, or
/// non-finite parameters) truncates the series and sets the flag; it is not
/// an error.
pub fn run_experiment(cfg: &ExperimentConfig, cell: &RunCell) -> Result<RunRecord, HarnessError> {
    let started = Instant::now();
    let objective = cfg.objective.build(cell.seed, cfg.batch_size)?;
    let obj: &dyn Objective = objective.as_ref();
    let mut theta = obj.initial_point(cell.seed);
    let mut opt = make_optimizer(cfg, cell, obj.dim())?;
    let mut rec = RunRecord {
        cell: *cell,
        optimizer: cfg.optimizer,
        objective: obj.name().to_string(),
        classifier: obj.is_classifier(),
        train_loss: Vec::with_capacity(cfg.steps),
        val: Vec::new(),
        diverged: false,
        diverged_at: None,
        error: None,
        seconds: None,
        digest: String::new(),
        sparse_steps: 0,
        dense_steps: 0,
    };
    let validate = |theta: &[f64], step: usize| -> Result<ValPoint, HarnessError> {
        let v = obj.validate(theta)?;
        Ok(ValPoint {
            step,
            loss: v.loss,
            f1: v.f1,
        })
    };

    for step in 0..cfg.steps {
        let eval = obj.eval_step(&theta, step as u64)?;
        rec.train_loss.push(eval.loss);
        if step % cfg.eval_every == 0 {
            rec.val.push(validate(&theta, step)?);
        }
        let blown = !eval.loss.is_finite() || eval.loss > cfg.divergence_threshold;
        let bad_grad = eval.grad.iter().any(|g| !g.is_finite());
        if blown || bad_grad {
            rec.diverged = true;
            rec.diverged_at = Some(step);
            if step % cfg.eval_every != 0 {
                rec.val.push(validate(&theta, step)?);
            }
            break;
        }
        let report = opt.step(&mut theta, &eval.grad)?;
        match report.mode {
            Some(GradientMode::Sparse) => rec.sparse_steps += 1,
            Some(GradientMode::Dense) => rec.dense_steps += 1,
            None => {}
        }
        if report.diverged {
            rec.diverged = true;
            rec.diverged_at = Some(step + 1);
            rec.val.push(validate(&theta, step + 1)?);
            break;
        }
    }
    if !rec.diverged {
        rec.val.push(validate(&theta, cfg.steps)?);
    }
    rec.digest = digest(&theta);
    if cfg.record_timing {
        rec.seconds = Some(started.elapsed().as_secs_f64());
    }
    Ok(rec)
}

/// Runs every cell of the config. A cell that fails is recorded with its
/// error and the sweep carries on. With `jobs > 1` cells run on a dedicated
/// thread pool; the result order is canonical either way.
pub fn sweep(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>, HarnessError> {
    cfg.validate()?;
    let cells = cfg.cells();
    let one = |cell: &RunCell| {
        run_experiment(cfg, cell).unwrap_or_else(|e| RunRecord::failed(cfg, *cell, e))
    };
    if cfg.jobs <= 1 {
        return Ok(cells.iter().map(one).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| HarnessError::invalid("jobs", e.to_string()))?;
    Ok(pool.install(|| cells.par_iter().map(one).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::ObjectiveSpec;

    fn quad_cfg(opt: OptimizerKind) -> ExperimentConfig {
        ExperimentConfig::new(
            ObjectiveSpec::Quadratic {
                dim: 10,
                min_eig: 0.1,
                max_eig: 1.0,
                init_scale: 0.5,
            },
            opt,
        )
    }

    #[test]
    fn eve_defaults_solve_the_quadratic() {
        let cfg = quad_cfg(OptimizerKind::Eve);
        let cell = RunCell {
            index: 0,
            lr1: 1e-3,
            lr2: Some(1e-3),
            seed: 3,
        };
        let r = run_experiment(&cfg, &cell).unwrap();
        assert!(!r.diverged);
        assert_eq!(r.train_loss.len(), 2000);
        assert_eq!(r.val.len(), 2000 / 50 + 1);
        assert_eq!(r.val.last().unwrap().step, 2000);
        assert!(r.final_loss().unwrap() < 1e-6, "{:?}", r.final_loss());
        assert_eq!(r.dense_steps, 2000);
        assert_eq!(r.digest.len(), 64);
    }

    #[test]
    fn sgd_with_huge_rate_diverges_and_truncates() {
        let mut cfg = quad_cfg(OptimizerKind::Sgd);
        cfg.objective = ObjectiveSpec::Quadratic {
            dim: 10,
            min_eig: 0.1,
            max_eig: 1.0,
            init_scale: 1.0,
        };
        let cell = RunCell {
            index: 0,
            lr1: 10.0,
            lr2: None,
            seed: 0,
        };
        let r = run_experiment(&cfg, &cell).unwrap();
        assert!(r.diverged);
        let at = r.diverged_at.unwrap();
        assert!(at < 2000);
        assert_eq!(r.train_loss.len(), at + 1);
        assert!(r.final_loss().unwrap() > 1e12 || !r.final_loss().unwrap().is_finite());
    }

    #[test]
    fn diverging_cell_is_isolated() {
        let mut cfg = quad_cfg(OptimizerKind::Eve);
        cfg.lr_grid = vec![1e-3, 1e3];
        cfg.lr2_grid = Some(vec![1e-3, 1e3]);
        cfg.steps = 200;
        let recs = sweep(&cfg).unwrap();
        assert_eq!(recs.len(), 4);
        let clean = recs
            .iter()
            .filter(|r| !r.diverged && r.error.is_none())
            .count();
        assert!(clean >= 1);
        let cheap = &recs[0];
        let alone = run_experiment(&cfg, &cheap.cell).unwrap();
        assert_eq!(&alone, cheap);
    }

    #[test]
    fn parallel_sweep_matches_serial() {
        let mut cfg = quad_cfg(OptimizerKind::Adam);
        cfg.steps = 100;
        cfg.n_seeds = 2;
        let serial = sweep(&cfg).unwrap();
        cfg.jobs = 4;
        assert_eq!(sweep(&cfg).unwrap(), serial);
    }

    #[test]
    fn timing_only_on_request() {
        let mut cfg = quad_cfg(OptimizerKind::Sgd);
        cfg.steps = 5;
        cfg.lr_grid = vec![0.1];
        assert!(sweep(&cfg).unwrap()[0].seconds.is_none());
        cfg.record_timing = true;
        assert!(sweep(&cfg).unwrap()[0].seconds.is_some());
    }

    #[test]
    fn classifier_records_f1() {
        let mut cfg = ExperimentConfig::new(
            ObjectiveSpec::Logistic {
                n: 100,
                dim: 3,
                spread: 1.0,
                val_frac: 0.3,
                data_path: None,
            },
            OptimizerKind::Eve,
        );
        cfg.steps = 60;
        cfg.lr_grid = vec![1e-2];
        let r = &sweep(&cfg).unwrap()[0];
        assert!(r.classifier);
        assert!(r.val.iter().all(|v| v.f1.is_some()));
        assert_eq!(
            r.val.iter().map(|v| v.step).collect::<Vec<_>>(),
            vec![0, 50, 60]
        );
    }
}
