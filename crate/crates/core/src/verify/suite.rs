//! The full battery of numeric checks run by `eve verify`.
//!
//! Theory-only quantities (Lipschitz constants, strong-convexity modulus and
//! the bounding constants of the convergence argument) have no runtime
//! counterpart. What can be checked numerically is checked here: oracle
//! agreement, velocity fixed points and their stationarity residuals,
//! geometric momentum convergence, the empirical contraction ratio, gradient
//! correctness, and branch coverage. The claim that an unspecified velocity
//! objective has zero gradient at the fixed point is not checkable as stated.

use std::collections::BTreeMap;

use rand::Rng;
use serde::Serialize;

use super::contraction::{contraction_ratio, Bounds};
use super::fixed_point::{sequential_fixed_point, velocity_fixed_point, VelocityMap};
use super::oracle::oracle_step;
use super::trajectory::trajectory_equal;
use crate::models::{
    finite_diff_gradient, make_logistic, make_mlp, make_sparse_linear, relative_error,
    synth_dataset, Activation, Beale, DatasetSpec, MiniMlpSpec, Objective, Quadratic, Rastrigin,
    Reduction, Rosenbrock, SparseLinearSpec,
};
use crate::optim::{
    baseline_step, eve_step, update_momenta, BaselineConfig, BaselineKind, BaselineState,
    EveConfig, EveState, GradientMode,
};
use crate::rng;

pub const TRAJECTORY_TOL: f64 = 1e-10;
pub const FIXED_POINT_TOL: f64 = 1e-10;
pub const CLOSED_FORM_TOL: f64 = 1e-8;
pub const ENVELOPE_SLACK: f64 = 1.01;
pub const MOMENTUM_FINAL_TOL: f64 = 1e-6;
pub const ANALYTIC_GRAD_TOL: f64 = 1e-5;
pub const MLP_GRAD_TOL: f64 = 1e-4;

/// `(beta1, beta2, beta3)` triples for the momentum envelope check. The
/// larger decay sits where `max^10000` is both below 1e-6 and above the
/// rounding floor.
pub const MOMENTUM_TRIPLES: [(f64, f64, f64); 5] = [
    (0.9, 0.998, 0.5),
    (0.5, 0.998, 0.1),
    (0.99, 0.9985, 0.9),
    (0.8, 0.9978, 0.3),
    (0.95, 0.9982, 0.7),
];

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Ungated checks are measurements; they never fail the suite.
    pub gated: bool,
    pub measured: BTreeMap<String, f64>,
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, tolerance: Option<f64>) -> Self {
        Self {
            name: name.into(),
            passed,
            gated: true,
            measured: BTreeMap::new(),
            tolerance,
            note: None,
        }
    }

    fn measure(mut self, key: &str, value: f64) -> Self {
        self.measured.insert(key.to_string(), value);
        self
    }

    fn note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    fn ungated(mut self) -> Self {
        self.gated = false;
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn failed(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.gated && !c.passed)
    }
}

/// The objectives every suite-level check runs on, all built from `seed`.
pub fn suite_objectives(seed: u64) -> Vec<Box<dyn Objective>> {
    vec![
        Box::new(suite_quadratic(seed)),
        Box::new(suite_sparse_linear(seed)),
        Box::new(suite_mlp(seed)),
        Box::new(suite_logistic(seed)),
        Box::new(Rosenbrock::new(4).expect("static dim")),
        Box::new(Rastrigin::new(3).expect("static dim")),
        Box::new(Beale),
    ]
}

pub fn suite_quadratic(seed: u64) -> Quadratic {
    Quadratic::random_spd(10, 0.1, 1.0, seed).expect("static spectrum")
}

pub fn suite_sparse_linear(seed: u64) -> crate::models::SparseLinear {
    let spec = SparseLinearSpec {
        n: 200,
        dim: 100,
        density: 0.05,
        val_frac: 0.2,
        batch_size: Some(1),
    };
    make_sparse_linear(&spec, seed).expect("static spec")
}

pub fn suite_mlp(seed: u64) -> crate::models::Mlp {
    let data = synth_dataset(
        &DatasetSpec::Blobs {
            n: 120,
            dim: 4,
            classes: 3,
            spread: 0.8,
            val_frac: 0.2,
        },
        seed,
    )
    .expect("static spec");
    let spec = MiniMlpSpec {
        widths: vec![4, 16, 3],
        activation: Activation::Tanh,
        reduction: Reduction::Mean,
        init_seed: 0,
        batch_size: None,
    };
    make_mlp(spec, data).expect("static spec")
}

pub fn suite_logistic(seed: u64) -> crate::models::Logistic {
    let data = synth_dataset(
        &DatasetSpec::Blobs {
            n: 200,
            dim: 5,
            classes: 2,
            spread: 1.5,
            val_frac: 0.25,
        },
        seed,
    )
    .expect("static spec");
    make_logistic(data, None).expect("two balanced classes")
}

fn hand_trace_check() -> Check {
    let cfg = EveConfig::default();
    let lib = eve_step(&[0.0], &[1.0], &EveState::new(1), &cfg).expect("valid step");
    let (ora, _) = oracle_step(&[0.0], &[1.0], &EveState::new(1), &cfg).expect("valid step");
    let diff = (lib.theta[0] - ora[0]).abs();
    Check::new(
        "eve_step_hand_trace",
        diff < 1e-12 && (ora[0] + 0.02551).abs() < 1e-5,
        Some(1e-12),
    )
    .measure("library", lib.theta[0])
    .measure("oracle", ora[0])
    .measure("abs_diff", diff)
}

fn oracle_checks(seeds: &[u64]) -> Vec<Check> {
    let cfg = EveConfig::default();
    let objectives: Vec<Box<dyn Objective>> = vec![
        Box::new(suite_quadratic(seeds[0])),
        Box::new(suite_sparse_linear(seeds[0])),
        Box::new(suite_mlp(seeds[0])),
    ];
    objectives
        .iter()
        .map(|obj| {
            let name = format!("oracle_equivalence/{}", obj.name());
            match trajectory_equal(obj.as_ref(), &cfg, 1000, seeds) {
                Ok(d) => Check::new(
                    name,
                    d.max_abs_param_diff < TRAJECTORY_TOL,
                    Some(TRAJECTORY_TOL),
                )
                .measure("max_abs_param_diff", d.max_abs_param_diff)
                .measure("max_abs_state_diff", d.max_abs_state_diff)
                .measure("steps", d.steps as f64),
                Err(e) => Check::new(name, false, Some(TRAJECTORY_TOL)).note(e.to_string()),
            }
        })
        .collect()
}

fn fixed_point_checks() -> Vec<Check> {
    let mut out = Vec::new();
    for g in [0.5, 1.0, 2.0] {
        for alpha in [0.9, 0.99] {
            let r = velocity_fixed_point(&VelocityMap::sparse(g, alpha), 1e-15, 1_000_000);
            let target = g * g / 4.0;
            let err = (r.v1_star - target).abs().max((r.v2_star - target).abs());
            out.push(
                Check::new(
                    format!("velocity_fixed_point/g={g}/alpha={alpha}"),
                    r.converged && err < CLOSED_FORM_TOL && r.residual < FIXED_POINT_TOL,
                    Some(FIXED_POINT_TOL),
                )
                .measure("v1_star", r.v1_star)
                .measure("v2_star", r.v2_star)
                .measure("closed_form_error", err)
                .measure("residual", r.residual)
                .measure("iterations", r.iterations as f64),
            );
        }
    }
    let dense = VelocityMap {
        g: 1.0,
        alpha: 0.9,
        beta2: 0.95,
        mode: GradientMode::Dense,
    };
    let r = velocity_fixed_point(&dense, 1e-15, 1_000_000);
    out.push(
        Check::new(
            "velocity_fixed_point/dense_residual",
            r.converged && r.residual < FIXED_POINT_TOL,
            Some(FIXED_POINT_TOL),
        )
        .measure("v1_star", r.v1_star)
        .measure("v2_star", r.v2_star)
        .measure("residual", r.residual),
    );
    let r = sequential_fixed_point(&VelocityMap::sparse(1.0, 0.9), 1e-15, 1_000_000);
    let curve = (r.v1_star.sqrt() + r.v2_star.sqrt() - 1.0).abs();
    out.push(
        Check::new(
            "velocity_fixed_point/sequential_on_curve",
            r.converged && r.residual < FIXED_POINT_TOL && curve < FIXED_POINT_TOL,
            Some(FIXED_POINT_TOL),
        )
        .measure("v1_star", r.v1_star)
        .measure("v2_star", r.v2_star)
        .measure("residual", r.residual)
        .measure("curve_defect", curve)
        .note("sequential ordering settles on sqrt(v1) + sqrt(v2) = g, not at g^2/4"),
    );
    out
}

/// Largest `‖m_t − g‖∞ / (‖g‖∞ max(β₁, β₂)^t)` over `steps` steps and the
/// final error, for one triple.
pub fn momentum_envelope(triple: (f64, f64, f64), g: &[f64], steps: u32) -> (f64, f64) {
    let (beta1, beta2, beta3) = triple;
    let cfg = EveConfig {
        beta1,
        beta2,
        beta3,
        ..EveConfig::default()
    };
    let gmax = g.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let rate = beta1.max(beta2);
    let mut st = EveState::new(g.len());
    let mut worst = 0.0f64;
    let mut last = 0.0;
    for t in 1..=steps {
        let m = update_momenta(&st, g, &cfg).expect("shapes match");
        let err =
            m.m.iter()
                .zip(g)
                .fold(0.0f64, |a, (m, g)| a.max((m - g).abs()));
        worst = worst.max(err / (gmax * rate.powi(t as i32)));
        last = err;
        st.m_s = m.m_s;
        st.m_l = m.m_l;
    }
    (worst, last)
}

fn momentum_checks() -> Vec<Check> {
    let g = [1.0, -0.5, 0.25, -1.0];
    MOMENTUM_TRIPLES
        .iter()
        .map(|&triple| {
            let (worst, last) = momentum_envelope(triple, &g, 10_000);
            Check::new(
                format!("momentum_envelope/{:?}", triple),
                worst <= ENVELOPE_SLACK && last < MOMENTUM_FINAL_TOL,
                Some(MOMENTUM_FINAL_TOL),
            )
            .measure("max_envelope_ratio", worst)
            .measure("final_error", last)
        })
        .collect()
}

fn contraction_checks(seed: u64) -> Vec<Check> {
    let region = Bounds::new(0.01, 4.0);
    let g_range = Bounds::new(-2.0, 2.0);
    let gated = contraction_ratio(1000, region, g_range, 0.9, seed);
    let loose = contraction_ratio(1000, region, g_range, 0.999, seed);
    vec![
        Check::new("contraction/alpha=0.9", gated.max_ratio < 1.0, Some(1.0))
            .measure("max_ratio", gated.max_ratio)
            .measure("max_ratio_nonnegative_g", gated.max_ratio_nonnegative_g)
            .measure("ratios_at_least_one", gated.ratios_at_least_one as f64)
            .measure("evaluated", gated.evaluated as f64)
            .measure("excluded_near_zero", gated.excluded_near_zero as f64),
        Check::new("contraction/alpha=0.999", loose.max_ratio < 1.0, None)
            .ungated()
            .measure("max_ratio", loose.max_ratio)
            .measure("ratios_at_least_one", loose.ratios_at_least_one as f64)
            .note("measurement only"),
    ]
}

/// Worst relative error between analytic and central-difference gradients at
/// `points` random points in `[-2, 2]^dim` (MLP: `[-1, 1]^dim`).
pub fn worst_gradient_error(obj: &dyn Objective, points: usize, seed: u64) -> f64 {
    let mut r = rng::rng(seed);
    let (span, h) = if obj.name() == "mlp" {
        (1.0, 1e-5)
    } else {
        (2.0, 1e-6)
    };
    let mut worst = 0.0f64;
    for _ in 0..points {
        let theta: Vec<f64> = (0..obj.dim())
            .map(|_| r.random_range(-span..span))
            .collect();
        let g = obj.eval(&theta).expect("dimension matches").grad;
        let fd = finite_diff_gradient(obj, &theta, h).expect("positive step");
        worst = worst.max(relative_error(&g, &fd, 1e-8));
    }
    worst
}

fn gradient_checks(seed: u64) -> Vec<Check> {
    suite_objectives(seed)
        .iter()
        .map(|obj| {
            let tol = if obj.name() == "mlp" {
                MLP_GRAD_TOL
            } else {
                ANALYTIC_GRAD_TOL
            };
            let worst = worst_gradient_error(obj.as_ref(), 20, seed);
            Check::new(
                format!("gradient_check/{}", obj.name()),
                worst < tol,
                Some(tol),
            )
            .measure("max_rel_error", worst)
        })
        .collect()
}

/// Runs the oracle for `steps` on an SPD quadratic started far from the
/// optimum; returns `(loss increases, first loss, last loss)`.
pub fn oracle_monotone_run(seed: u64, steps: usize) -> (usize, f64, f64) {
    let q = suite_quadratic(seed).with_init_scale(3.0);
    let cfg = EveConfig::default();
    let mut theta = q.initial_point(seed);
    let mut st = EveState::new(q.dim());
    let mut prev = q.eval(&theta).expect("dim").loss;
    let first = prev;
    let mut increases = 0;
    for _ in 0..steps {
        let g = q.eval(&theta).expect("dim").grad;
        let (t, s) = oracle_step(&theta, &g, &st, &cfg).expect("valid step");
        theta = t;
        st = s;
        let loss = q.eval(&theta).expect("dim").loss;
        if loss > prev {
            increases += 1;
        }
        prev = loss;
    }
    (increases, first, prev)
}

fn monotone_check(seed: u64) -> Check {
    let (increases, first, last) = oracle_monotone_run(seed, 2000);
    Check::new(
        "oracle_monotone_quadratic",
        increases == 0 && last < first,
        Some(0.0),
    )
    .measure("loss_increases", increases as f64)
    .measure("first_loss", first)
    .measure("last_loss", last)
}

/// With `beta3 = 1` the mixed momentum is exactly Adam's first moment.
pub fn adam_moment_max_diff(seed: u64, steps: usize) -> f64 {
    let mut r = rng::rng(seed);
    let cfg = EveConfig {
        beta3: 1.0,
        ..EveConfig::default()
    };
    let adam_cfg = BaselineConfig::default();
    let dim = 5;
    let mut eve_state = EveState::new(dim);
    let mut adam_state = BaselineState::new(dim);
    let theta = vec![0.0; dim];
    let mut worst = 0.0f64;
    for _ in 0..steps {
        let g: Vec<f64> = (0..dim).map(|_| r.random_range(-3.0..3.0)).collect();
        let m = update_momenta(&eve_state, &g, &cfg).expect("dims");
        let adam =
            baseline_step(BaselineKind::Adam, &theta, &g, &adam_state, &adam_cfg).expect("dims");
        for i in 0..dim {
            worst = worst.max((m.m[i] - adam.state.m[i]).abs());
        }
        eve_state.m_s = m.m_s;
        eve_state.m_l = m.m_l;
        adam_state = adam.state;
    }
    worst
}

fn adam_check(seed: u64) -> Check {
    let diff = adam_moment_max_diff(seed, 100);
    Check::new("adam_first_moment_equivalence", diff == 0.0, Some(0.0))
        .measure("max_abs_diff", diff)
}

fn branch_check(seeds: &[u64]) -> Vec<Check> {
    let cfg = EveConfig::default();
    let objectives: Vec<Box<dyn Objective>> = vec![
        Box::new(suite_sparse_linear(seeds[0])),
        Box::new(suite_quadratic(seeds[0])),
        Box::new(suite_logistic(seeds[0])),
        Box::new(suite_mlp(seeds[0])),
    ];
    objectives
        .iter()
        .map(|obj| {
            let d = trajectory_equal(obj.as_ref(), &cfg, 300, &seeds[..1]).expect("valid run");
            let total = (d.sparse_steps + d.dense_steps) as f64;
            let sparse_frac = d.sparse_steps as f64 / total;
            let (passed, tol) = if obj.name() == "sparse_linear" {
                (sparse_frac > 0.9, 0.9)
            } else {
                (d.sparse_steps == 0, 0.0)
            };
            Check::new(format!("branch_coverage/{}", obj.name()), passed, Some(tol))
                .measure("sparse_fraction", sparse_frac)
        })
        .collect()
}

pub fn run_suite(seed: u64) -> VerifyReport {
    let seeds = rng::expand_seeds(seed, 3);
    let mut checks = vec![hand_trace_check()];
    checks.extend(oracle_checks(&seeds));
    checks.extend(fixed_point_checks());
    checks.extend(momentum_checks());
    checks.extend(contraction_checks(seed));
    checks.extend(gradient_checks(seed));
    checks.push(monotone_check(seed));
    checks.push(adam_check(seed));
    checks.extend(branch_check(&seeds));
    let passed = checks.iter().all(|c| c.passed || !c.gated);
    VerifyReport { passed, checks }
}
