use std::collections::HashSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::models::{
    make_logistic, make_mlp, make_sparse_linear, synth_dataset, Activation, Beale, Dataset,
    DatasetSpec, MiniMlpSpec, ModelError, Objective, Quadratic, Rastrigin, Reduction, Rosenbrock,
    SparseLinearSpec,
};
use crate::optim::{BaselineConfig, BaselineKind, EveConfig};
use crate::rng;

/// The objective a sweep trains on. Data-backed objectives draw their data,
/// mini-batch order and starting point from the per-run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveSpec {
    /// Random SPD quadratic with eigenvalues evenly spaced in
    /// `[min_eig, max_eig]`, started uniformly in `[-init_scale, init_scale]`.
    Quadratic {
        #[serde(default = "d_quad_dim")]
        dim: usize,
        #[serde(default = "d_min_eig")]
        min_eig: f64,
        #[serde(default = "d_one")]
        max_eig: f64,
        #[serde(default = "d_init_scale")]
        init_scale: f64,
    },
    Rosenbrock {
        #[serde(default = "d_two")]
        dim: usize,
    },
    Rastrigin {
        #[serde(default = "d_two")]
        dim: usize,
    },
    Beale,
    /// Binary logistic regression on two Gaussian blobs, or on a CSV file
    /// with columns `x0..x{d-1},label` when `data_path` is set.
    Logistic {
        #[serde(default = "d_n")]
        n: usize,
        #[serde(default = "d_data_dim")]
        dim: usize,
        #[serde(default = "d_spread")]
        spread: f64,
        #[serde(default = "d_val_frac")]
        val_frac: f64,
        #[serde(default)]
        data_path: Option<PathBuf>,
    },
    /// Softmax MLP on Gaussian blobs.
    Mlp {
        #[serde(default = "d_n")]
        n: usize,
        #[serde(default = "d_data_dim")]
        dim: usize,
        #[serde(default = "d_classes")]
        classes: usize,
        #[serde(default = "d_spread")]
        spread: f64,
        #[serde(default = "d_val_frac")]
        val_frac: f64,
        #[serde(default = "d_hidden")]
        hidden: Vec<usize>,
        #[serde(default = "d_activation")]
        activation: Activation,
        #[serde(default = "d_reduction")]
        reduction: Reduction,
    },
    /// Least squares on k-hot features; one example per step by default.
    SparseLinear {
        #[serde(default = "d_n")]
        n: usize,
        #[serde(default = "d_sparse_dim")]
        dim: usize,
        #[serde(default = "d_density")]
        density: f64,
        #[serde(default = "d_val_frac")]
        val_frac: f64,
    },
}

fn d_quad_dim() -> usize {
    10
}
fn d_min_eig() -> f64 {
    0.1
}
fn d_one() -> f64 {
    1.0
}
fn d_init_scale() -> f64 {
    0.5
}
fn d_two() -> usize {
    2
}
fn d_n() -> usize {
    200
}
fn d_data_dim() -> usize {
    5
}
fn d_sparse_dim() -> usize {
    100
}
fn d_classes() -> usize {
    3
}
fn d_spread() -> f64 {
    1.5
}
fn d_val_frac() -> f64 {
    0.2
}
fn d_density() -> f64 {
    0.05
}
fn d_hidden() -> Vec<usize> {
    vec![16]
}
fn d_activation() -> Activation {
    Activation::Tanh
}
fn d_reduction() -> Reduction {
    Reduction::Mean
}

impl ObjectiveSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ObjectiveSpec::Quadratic { .. } => "quadratic",
            ObjectiveSpec::Rosenbrock { .. } => "rosenbrock",
            ObjectiveSpec::Rastrigin { .. } => "rastrigin",
            ObjectiveSpec::Beale => "beale",
            ObjectiveSpec::Logistic { .. } => "logistic",
            ObjectiveSpec::Mlp { .. } => "mlp",
            ObjectiveSpec::SparseLinear { .. } => "sparse_linear",
        }
    }

    /// Builds the objective for one run. `batch_size` of `None` keeps the
    /// objective's own default and `Some(0)` forces full batch.
    pub fn build(
        &self,
        seed: u64,
        batch_size: Option<usize>,
    ) -> Result<Box<dyn Objective>, ModelError> {
        let full_or = |default: Option<usize>| match batch_size {
            None => default,
            Some(0) => None,
            Some(b) => Some(b),
        };
        Ok(match self {
            ObjectiveSpec::Quadratic {
                dim,
                min_eig,
                max_eig,
                init_scale,
            } => {
                if !(*init_scale > 0.0 && init_scale.is_finite()) {
                    return Err(ModelError::Config(format!(
                        "init_scale must be positive, got {init_scale}"
                    )));
                }
                Box::new(
                    Quadratic::random_spd(*dim, *min_eig, *max_eig, seed)?
                        .with_init_scale(*init_scale),
                )
            }
            ObjectiveSpec::Rosenbrock { dim } => Box::new(Rosenbrock::new(*dim)?),
            ObjectiveSpec::Rastrigin { dim } => Box::new(Rastrigin::new(*dim)?),
            ObjectiveSpec::Beale => Box::new(Beale),
            ObjectiveSpec::Logistic {
                n,
                dim,
                spread,
                val_frac,
                data_path,
            } => {
                let data = match data_path {
                    Some(path) => Dataset::read_csv(std::fs::File::open(path)?, *val_frac, seed)?,
                    None => synth_dataset(
                        &DatasetSpec::Blobs {
                            n: *n,
                            dim: *dim,
                            classes: 2,
                            spread: *spread,
                            val_frac: *val_frac,
                        },
                        seed,
                    )?,
                };
                Box::new(make_logistic(data, full_or(None))?)
            }
            ObjectiveSpec::Mlp {
                n,
                dim,
                classes,
                spread,
                val_frac,
                hidden,
                activation,
                reduction,
            } => {
                let data = synth_dataset(
                    &DatasetSpec::Blobs {
                        n: *n,
                        dim: *dim,
                        classes: *classes,
                        spread: *spread,
                        val_frac: *val_frac,
                    },
                    seed,
                )?;
                let mut widths = vec![*dim];
                widths.extend(hidden);
                widths.push(*classes);
                let spec = MiniMlpSpec {
                    widths,
                    activation: *activation,
                    reduction: *reduction,
                    init_seed: rng::derive(seed, 1),
                    batch_size: full_or(None),
                };
                Box::new(make_mlp(spec, data)?)
            }
            ObjectiveSpec::SparseLinear {
                n,
                dim,
                density,
                val_frac,
            } => {
                let spec = SparseLinearSpec {
                    n: *n,
                    dim: *dim,
                    density: *density,
                    val_frac: *val_frac,
                    batch_size: full_or(Some(1)),
                };
                Box::new(make_sparse_linear(&spec, seed)?)
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Eve,
    Sgd,
    Momentum,
    Adam,
    Amsgrad,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Eve => "eve",
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Momentum => "momentum",
            OptimizerKind::Adam => "adam",
            OptimizerKind::Amsgrad => "amsgrad",
        }
    }

    pub fn baseline(self) -> Option<BaselineKind> {
        match self {
            OptimizerKind::Eve => None,
            OptimizerKind::Sgd => Some(BaselineKind::Sgd),
            OptimizerKind::Momentum => Some(BaselineKind::Momentum),
            OptimizerKind::Adam => Some(BaselineKind::Adam),
            OptimizerKind::Amsgrad => Some(BaselineKind::AmsGrad),
        }
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "eve" => OptimizerKind::Eve,
            "sgd" => OptimizerKind::Sgd,
            "momentum" => OptimizerKind::Momentum,
            "adam" => OptimizerKind::Adam,
            "amsgrad" => OptimizerKind::Amsgrad,
            other => return Err(HarnessError::invalid(
                "optimizer",
                format!(
                    "unknown optimizer `{other}` (expected eve, sgd, momentum, adam or amsgrad)"
                ),
            )),
        })
    }
}

/// Which losses a summary pools.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummaryField {
    /// The last validation loss of every run.
    FinalValLoss,
    /// The lowest validation loss of every run.
    BestValLoss,
    /// Every validation loss of every run.
    Series,
}

/// `n` points evenly spaced in `log10` between `lo` and `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.log10(), hi.log10());
            (0..n)
                .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
                .collect()
        }
    }
}

fn default_grid() -> Vec<f64> {
    log_grid(1e-4, 1e-2, 5)
}
fn default_name() -> String {
    "sweep".into()
}
fn default_steps() -> usize {
    2000
}
fn default_n_seeds() -> usize {
    1
}
fn default_eval_every() -> usize {
    50
}
fn default_threshold() -> f64 {
    1e12
}
fn default_pooling() -> SummaryField {
    SummaryField::Series
}
fn default_jobs() -> usize {
    1
}
fn default_out() -> PathBuf {
    PathBuf::from("runs")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub objective: ObjectiveSpec,
    pub optimizer: OptimizerKind,
    /// Hyper-parameters for EVE. The learning rates come from the grids.
    #[serde(default)]
    pub eve: EveConfig,
    /// Hyper-parameters for the baselines. `lr` comes from the grid.
    #[serde(default)]
    pub baseline: BaselineConfig,
    /// Primary learning rates, shared by every optimizer.
    #[serde(default = "default_grid")]
    pub lr_grid: Vec<f64>,
    /// Secondary learning rates for EVE. Unset ties `lr2` to `lr1`.
    #[serde(default)]
    pub lr2_grid: Option<Vec<f64>>,
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Examples per step for data-backed objectives; 0 means full batch.
    #[serde(default)]
    pub batch_size: Option<usize>,
    /// Root seed; per-run seeds are expanded from it.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_n_seeds")]
    pub n_seeds: usize,
    /// Explicit per-run seeds, overriding `seed` and `n_seeds`.
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
    #[serde(default = "default_threshold")]
    pub divergence_threshold: f64,
    #[serde(default = "default_pooling")]
    pub pooling: SummaryField,
    /// Wall-clock timings make output files nondeterministic, so they are
    /// recorded only on request.
    #[serde(default)]
    pub record_timing: bool,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
}

/// One `(lr1, lr2, seed)` cell of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunCell {
    pub index: usize,
    pub lr1: f64,
    /// Resolved secondary rate for EVE, `None` for the baselines.
    pub lr2: Option<f64>,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn new(objective: ObjectiveSpec, optimizer: OptimizerKind) -> Self {
        Self {
            name: default_name(),
            objective,
            optimizer,
            eve: EveConfig::default(),
            baseline: BaselineConfig::default(),
            lr_grid: default_grid(),
            lr2_grid: None,
            steps: default_steps(),
            batch_size: None,
            seed: 0,
            n_seeds: default_n_seeds(),
            seeds: None,
            eval_every: default_eval_every(),
            divergence_threshold: default_threshold(),
            pooling: default_pooling(),
            record_timing: false,
            jobs: default_jobs(),
            out_dir: default_out(),
        }
    }

    pub fn seed_list(&self) -> Vec<u64> {
        match &self.seeds {
            Some(s) => s.clone(),
            None => rng::expand_seeds(self.seed, self.n_seeds),
        }
    }

    /// The secondary grid actually swept: empty for baselines.
    pub fn lr2_values(&self) -> Vec<Option<f64>> {
        match (self.optimizer, &self.lr2_grid) {
            (OptimizerKind::Eve, Some(g)) => g.iter().map(|&x| Some(x)).collect(),
            _ => vec![None],
        }
    }

    /// Every cell in canonical order: primary rate, then secondary rate,
    /// then seed.
    pub fn cells(&self) -> Vec<RunCell> {
        let seeds = self.seed_list();
        let mut out = Vec::new();
        for &lr1 in &self.lr_grid {
            for lr2 in self.lr2_values() {
                for &seed in &seeds {
                    let lr2 = match self.optimizer {
                        OptimizerKind::Eve => Some(lr2.unwrap_or(lr1)),
                        _ => None,
                    };
                    out.push(RunCell {
                        index: out.len(),
                        lr1,
                        lr2,
                        seed,
                    });
                }
            }
        }
        out
    }

    pub fn eve_config(&self, cell: &RunCell) -> EveConfig {
        EveConfig {
            lr1: cell.lr1,
            lr2: cell.lr2.unwrap_or(cell.lr1),
            ..self.eve.clone()
        }
    }

    pub fn baseline_config(&self, cell: &RunCell) -> BaselineConfig {
        BaselineConfig {
            lr: cell.lr1,
            ..self.baseline.clone()
        }
    }

    /// Checks every field and builds the objective once, so a bad config is
    /// reported before any training starts.
    pub fn validate(&self) -> Result<(), HarnessError> {
        fn rates(field: &'static str, grid: &[f64]) -> Result<(), HarnessError> {
            if grid.is_empty() {
                return Err(HarnessError::invalid(field, "grid must not be empty"));
            }
            if let Some(x) = grid.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
                return Err(HarnessError::invalid(
                    field,
                    format!("learning rates must be positive and finite, got {x}"),
                ));
            }
            let mut seen = HashSet::new();
            if let Some(x) = grid.iter().find(|x| !seen.insert(x.to_bits())) {
                return Err(HarnessError::invalid(
                    field,
                    format!("duplicate learning rate {x}"),
                ));
            }
            Ok(())
        }
        rates("lr_grid", &self.lr_grid)?;
        if let Some(g) = &self.lr2_grid {
            if self.optimizer != OptimizerKind::Eve {
                return Err(HarnessError::invalid(
                    "lr2_grid",
                    "a secondary grid applies to eve only",
                ));
            }
            rates("lr2_grid", g)?;
        }
        if self.steps == 0 {
            return Err(HarnessError::invalid("steps", "must be positive"));
        }
        if self.eval_every == 0 {
            return Err(HarnessError::invalid("eval_every", "must be positive"));
        }
        if self.jobs == 0 {
            return Err(HarnessError::invalid("jobs", "must be positive"));
        }
        if !(self.divergence_threshold > 0.0) {
            return Err(HarnessError::invalid(
                "divergence_threshold",
                "must be positive",
            ));
        }
        match &self.seeds {
            Some(s) if s.is_empty() => {
                return Err(HarnessError::invalid("seeds", "must not be empty"))
            }
            Some(s) => {
                let mut seen = HashSet::new();
                if let Some(x) = s.iter().find(|x| !seen.insert(**x)) {
                    return Err(HarnessError::invalid(
                        "seeds",
                        format!("duplicate seed {x}"),
                    ));
                }
            }
            None if self.n_seeds == 0 => {
                return Err(HarnessError::invalid("n_seeds", "must be positive"))
            }
            None => {}
        }
        let probe = RunCell {
            index: 0,
            lr1: self.lr_grid[0],
            lr2: None,
            seed: self.seed_list()[0],
        };
        match self.optimizer.baseline() {
            None => self
                .eve_config(&probe)
                .validate()
                .map_err(|e| HarnessError::invalid("eve", e.to_string()))?,
            Some(kind) => self
                .baseline_config(&probe)
                .validate(kind)
                .map_err(|e| HarnessError::invalid("baseline", e.to_string()))?,
        }
        self.objective
            .build(probe.seed, self.batch_size)
            .map_err(|e| HarnessError::invalid("objective", e.to_string()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad() -> ObjectiveSpec {
        ObjectiveSpec::Quadratic {
            dim: 4,
            min_eig: 0.1,
            max_eig: 1.0,
            init_scale: 0.5,
        }
    }

    #[test]
    fn default_grid_is_log_spaced() {
        let g = default_grid();
        assert_eq!(g.len(), 5);
        for (x, e) in g
            .iter()
            .zip([1e-4, 10f64.powf(-3.5), 1e-3, 10f64.powf(-2.5), 1e-2])
        {
            assert!((x / e - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn adam_cardinality() {
        let mut cfg = ExperimentConfig::new(quad(), OptimizerKind::Adam);
        cfg.n_seeds = 3;
        assert_eq!(cfg.cells().len(), 15);
        assert!(cfg.cells().iter().all(|c| c.lr2.is_none()));
    }

    #[test]
    fn eve_two_grid_cardinality_and_order() {
        let mut cfg = ExperimentConfig::new(quad(), OptimizerKind::Eve);
        cfg.lr_grid = log_grid(1e-4, 1e-2, 4);
        cfg.lr2_grid = Some(log_grid(1e-4, 1e-2, 4));
        cfg.n_seeds = 2;
        let cells = cfg.cells();
        assert_eq!(cells.len(), 32);
        let triples: HashSet<_> = cells
            .iter()
            .map(|c| (c.lr1.to_bits(), c.lr2.unwrap().to_bits(), c.seed))
            .collect();
        assert_eq!(triples.len(), 32);
        assert_eq!(cells[1].lr1, cells[0].lr1);
        assert_ne!(cells[1].seed, cells[0].seed);
        assert_eq!(cells[2].lr2, Some(cfg.lr2_grid.as_ref().unwrap()[1]));
        assert!(cells.iter().enumerate().all(|(i, c)| c.index == i));
    }

    #[test]
    fn tied_secondary_rate() {
        let cfg = ExperimentConfig::new(quad(), OptimizerKind::Eve);
        assert!(cfg.cells().iter().all(|c| c.lr2 == Some(c.lr1)));
    }

    #[test]
    fn validation_rejects_bad_fields() {
        let mut cfg = ExperimentConfig::new(quad(), OptimizerKind::Adam);
        assert!(cfg.validate().is_ok());
        cfg.lr2_grid = Some(vec![1e-3]);
        assert!(
            matches!(cfg.validate(), Err(HarnessError::InvalidConfig { field, .. }) if field == "lr2_grid")
        );
        cfg.lr2_grid = None;
        cfg.lr_grid = vec![];
        assert!(cfg.validate().is_err());
        cfg.lr_grid = vec![1e-3, 1e-3];
        assert!(cfg.validate().is_err());
        cfg.lr_grid = vec![1e-3];
        cfg.steps = 0;
        assert!(cfg.validate().is_err());
        cfg.steps = 10;
        cfg.objective = ObjectiveSpec::Quadratic {
            dim: 4,
            min_eig: -1.0,
            max_eig: 1.0,
            init_scale: 0.5,
        };
        assert!(
            matches!(cfg.validate(), Err(HarnessError::InvalidConfig { field, .. }) if field == "objective")
        );
    }

    #[test]
    fn json_round_trip_with_defaults() {
        let cfg: ExperimentConfig =
            serde_json::from_str(r#"{"objective": {"kind": "logistic"}, "optimizer": "eve"}"#)
                .unwrap();
        assert_eq!(cfg.steps, 2000);
        assert_eq!(cfg.eval_every, 50);
        assert_eq!(cfg.pooling, SummaryField::Series);
        let back: ExperimentConfig =
            serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert!(serde_json::from_str::<ExperimentConfig>(
            r#"{"objective": {"kind": "beale"}, "optimizer": "eve", "stepz": 3}"#
        )
        .is_err());
    }

    #[test]
    fn batch_size_zero_forces_full_batch() {
        let spec = ObjectiveSpec::SparseLinear {
            n: 50,
            dim: 20,
            density: 0.1,
            val_frac: 0.2,
        };
        let mini = spec.build(1, None).unwrap();
        let full = spec.build(1, Some(0)).unwrap();
        let theta = vec![0.1; 20];
        assert_ne!(
            mini.eval_step(&theta, 0).unwrap(),
            full.eval_step(&theta, 0).unwrap()
        );
        assert_eq!(
            full.eval_step(&theta, 0).unwrap(),
            full.eval(&theta).unwrap()
        );
    }
}
