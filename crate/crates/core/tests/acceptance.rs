//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use eve_core::harness::{
    export, format_table_row, log_grid, summarize, sweep, ExperimentConfig, ObjectiveSpec,
    OptimizerKind, RunRecord, SummaryField, SummaryStats,
};
use eve_core::models::Objective;
use eve_core::optim::EveConfig;
use eve_core::rng;
use eve_core::verify::suite::{
    momentum_envelope, suite_mlp, suite_objectives, suite_quadratic, suite_sparse_linear,
    worst_gradient_error,
};
use eve_core::verify::{
    contraction_ratio, trajectory_equal, velocity_fixed_point, Bounds, VelocityMap,
};

type Criterion = (&'static str, Box<dyn FnOnce() -> Outcome>);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn within(limit: Duration, elapsed: Duration) -> bool {
    elapsed < limit
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let seeds = rng::expand_seeds(2024, 3);
    let cfg = EveConfig::default();
    let objectives: Vec<Box<dyn Objective>> = vec![
        Box::new(suite_quadratic(seeds[0])),
        Box::new(suite_sparse_linear(seeds[0])),
        Box::new(suite_mlp(seeds[0])),
    ];
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for obj in &objectives {
        assert!(obj.name() != "mlp" || obj.dim() <= 1000);
        let d = trajectory_equal(obj.as_ref(), &cfg, 1000, &seeds).expect("trajectory run");
        worst = worst.max(d.max_abs_param_diff);
        parts.push(format!("{}={:.1e}", obj.name(), d.max_abs_param_diff));
    }
    let elapsed = start.elapsed();
    outcome(
        worst < 1e-10 && within(Duration::from_secs(10), elapsed),
        format!(
            "max |Δθ| {} (< 1e-10), {:.2?} (< 10 s)",
            parts.join(" "),
            elapsed
        ),
    )
}

fn velocity_fixed_points() -> Outcome {
    let start = Instant::now();
    let mut worst_err = 0.0f64;
    let mut worst_res = 0.0f64;
    let mut all_converged = true;
    for g in [0.5, 1.0, 2.0] {
        for alpha in [0.9, 0.99] {
            let r = velocity_fixed_point(&VelocityMap::sparse(g, alpha), 1e-15, 1_000_000);
            let target = g * g / 4.0;
            worst_err = worst_err
                .max((r.v1_star - target).abs())
                .max((r.v2_star - target).abs());
            worst_res = worst_res.max(r.residual);
            all_converged &= r.converged;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        all_converged && worst_err < 1e-8 && worst_res < 1e-10 && within(Duration::from_secs(1), elapsed),
        format!("max |v - g²/4| {worst_err:.1e} (< 1e-8), max residual {worst_res:.1e} (< 1e-10), {elapsed:.2?} (< 1 s)"),
    )
}

fn momentum_convergence() -> Outcome {
    // The envelope decays as max(β₁, β₂)^t, so reaching 1e-6 by t = 10⁴ with
    // room above the rounding floor needs max(β₁, β₂) in about [0.9975, 0.9986].
    let triples = [
        (0.9, 0.998, 0.5),
        (0.5, 0.998, 0.1),
        (0.99, 0.9985, 0.9),
        (0.8, 0.9978, 0.3),
        (0.95, 0.9982, 0.7),
    ];
    let g = [1.0, -0.5, 0.25, -1.0];
    let mut worst_ratio = 0.0f64;
    let mut worst_final = 0.0f64;
    for t in triples {
        let (ratio, last) = momentum_envelope(t, &g, 10_000);
        worst_ratio = worst_ratio.max(ratio);
        worst_final = worst_final.max(last);
    }
    outcome(
        worst_ratio <= 1.01 && worst_final < 1e-6,
        format!("max error/envelope {worst_ratio:.4} (≤ 1.01), max ‖m - g‖∞ at t=10⁴ {worst_final:.1e} (< 1e-6)"),
    )
}

fn empirical_contraction() -> Outcome {
    let r = contraction_ratio(1000, Bounds::new(0.01, 4.0), Bounds::new(-2.0, 2.0), 0.9, 7);
    outcome(
        r.max_ratio < 1.0,
        format!(
            "max ratio {:.4} (< 1) over {} pairs, {} pairs ≥ 1; restricted to g ≥ 0: {:.4}",
            r.max_ratio, r.evaluated, r.ratios_at_least_one, r.max_ratio_nonnegative_g
        ),
    )
}

fn eve_sweep(objective: ObjectiveSpec, steps: usize) -> Vec<RunRecord> {
    let mut cfg = ExperimentConfig::new(objective, OptimizerKind::Eve);
    cfg.steps = steps;
    cfg.n_seeds = 3;
    cfg.seed = 11;
    sweep(&cfg).expect("valid sweep")
}

fn branch_coverage() -> Outcome {
    let sparse = eve_sweep(
        ObjectiveSpec::SparseLinear {
            n: 200,
            dim: 100,
            density: 0.05,
            val_frac: 0.2,
        },
        500,
    );
    let (s, d) = sparse
        .iter()
        .fold((0, 0), |(s, d), r| (s + r.sparse_steps, d + r.dense_steps));
    let sparse_frac = s as f64 / (s + d) as f64;
    let dense_objectives = [
        ObjectiveSpec::Quadratic {
            dim: 10,
            min_eig: 0.1,
            max_eig: 1.0,
            init_scale: 0.5,
        },
        ObjectiveSpec::Logistic {
            n: 200,
            dim: 5,
            spread: 1.5,
            val_frac: 0.2,
            data_path: None,
        },
        ObjectiveSpec::Mlp {
            n: 120,
            dim: 4,
            classes: 3,
            spread: 0.8,
            val_frac: 0.2,
            hidden: vec![16],
            activation: eve_core::models::Activation::Tanh,
            reduction: eve_core::models::Reduction::Mean,
        },
        ObjectiveSpec::Rosenbrock { dim: 4 },
        ObjectiveSpec::Beale,
    ];
    let mut dense_total = 0;
    let mut sparse_on_dense = 0;
    for obj in dense_objectives {
        for r in eve_sweep(obj, 300) {
            dense_total += r.dense_steps;
            sparse_on_dense += r.sparse_steps;
        }
    }
    outcome(
        sparse_frac > 0.9 && sparse_on_dense == 0 && dense_total > 0,
        format!(
            "sparse linear: {:.1}% Sparse of {} steps (> 90%); dense objectives: {} Dense, {} Sparse",
            100.0 * sparse_frac,
            s + d,
            dense_total,
            sparse_on_dense
        ),
    )
}

struct Protocol {
    /// `(objective, optimizer, final-loss summary, any diverged)`.
    rows: Vec<(String, OptimizerKind, SummaryStats, bool)>,
}

fn protocol(out: &Path) -> Protocol {
    let _ = fs::remove_dir_all(out);
    let objectives = [
        ObjectiveSpec::Quadratic {
            dim: 10,
            min_eig: 0.1,
            max_eig: 1.0,
            init_scale: 0.5,
        },
        ObjectiveSpec::Logistic {
            n: 200,
            dim: 5,
            spread: 1.5,
            val_frac: 0.2,
            data_path: None,
        },
    ];
    let mut rows = Vec::new();
    for objective in objectives {
        for optimizer in [OptimizerKind::Eve, OptimizerKind::Adam] {
            let mut cfg = ExperimentConfig::new(objective.clone(), optimizer);
            cfg.name = format!("{}-{}", objective.name(), optimizer.name());
            cfg.lr_grid = log_grid(1e-4, 1e-2, 5);
            cfg.n_seeds = 3;
            cfg.seed = 42;
            cfg.pooling = SummaryField::FinalValLoss;
            let records = sweep(&cfg).expect("valid sweep");
            assert_eq!(records.len(), 15);
            let dir = out.join(&cfg.name);
            let summary = export(&cfg, &records, &dir).expect("export");
            let stats = summary.stats.expect("finite final losses");
            rows.push((
                objective.name().to_string(),
                optimizer,
                stats,
                records.iter().any(|r| r.diverged),
            ));
        }
    }
    Protocol { rows }
}

fn miniature_protocol(out: &Path) -> Outcome {
    let start = Instant::now();
    let p = protocol(out);
    let elapsed = start.elapsed();
    let mut gate = within(Duration::from_secs(120), elapsed);
    let mut lines = Vec::new();
    for (objective, optimizer, stats, diverged) in &p.rows {
        if *optimizer == OptimizerKind::Eve {
            gate &= stats.std.is_finite() && !diverged;
        }
        lines.push(format!(
            "      {objective:<9} {:<4} final loss median/mean/std/min: {} (median {:.3e}){}",
            optimizer.name(),
            format_table_row(stats),
            stats.median,
            if *diverged { " (diverged runs)" } else { "" }
        ));
    }
    for pair in p.rows.chunks(2) {
        let (eve, adam) = (&pair[0], &pair[1]);
        let better = if eve.2.median < adam.2.median {
            "eve"
        } else {
            "adam"
        };
        lines.push(format!(
            "      {:<9} lower median final loss: {better} (reported, not gated)",
            eve.0
        ));
    }
    let csvs = count_files(out, "csv");
    let svgs = count_files(out, "svg");
    gate &= csvs == 60 && svgs == 8;
    outcome(
        gate,
        format!(
            "{csvs} CSVs, {svgs} SVGs, {elapsed:.2?} (< 2 min)\n{}",
            lines.join("\n")
        ),
    )
}

fn count_files(dir: &Path, ext: &str) -> usize {
    walk(dir)
        .iter()
        .filter(|p| p.extension().is_some_and(|e| e == ext))
        .count()
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    if let Ok(entries) = fs::read_dir(dir) {
        for e in entries.flatten() {
            let p = e.path();
            if p.is_dir() {
                out.extend(walk(&p));
            } else {
                out.push(p);
            }
        }
    }
    out.sort();
    out
}

fn gradient_correctness() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for obj in suite_objectives(5) {
        let tol = if obj.name() == "mlp" { 1e-4 } else { 1e-5 };
        let worst = worst_gradient_error(obj.as_ref(), 20, 5);
        ok &= worst < tol;
        parts.push(format!("{}={worst:.1e}", obj.name()));
    }
    outcome(
        ok,
        format!("max rel. error {} (< 1e-5, MLP < 1e-4)", parts.join(" ")),
    )
}

fn determinism(first: &Path, second: &Path) -> Outcome {
    protocol(second);
    let a = walk(first);
    let b = walk(second);
    let rel = |root: &Path, v: &[PathBuf]| -> Vec<PathBuf> {
        v.iter()
            .map(|p| p.strip_prefix(root).unwrap().to_path_buf())
            .collect()
    };
    let same_names = rel(first, &a) == rel(second, &b);
    let mut differing = 0;
    let mut compared = 0;
    if same_names {
        for (x, y) in a.iter().zip(&b) {
            if matches!(x.extension().and_then(|e| e.to_str()), Some("csv" | "json")) {
                compared += 1;
                if fs::read(x).unwrap() != fs::read(y).unwrap() {
                    differing += 1;
                }
            }
        }
    }
    outcome(
        same_names && compared > 0 && differing == 0,
        format!("{compared} CSV/JSON files compared, {differing} differ"),
    )
}

fn table_fixture() -> Outcome {
    const ROW: &str = "3.73 / 251.93 / 3,833.71 / 2.55";
    let stored = SummaryStats {
        median: 3.73,
        mean: 251.93,
        std: 3833.71,
        min: 2.55,
        count: 0,
    };
    let json = serde_json::to_string(&stored).unwrap();
    let back: SummaryStats = serde_json::from_str(&json).unwrap();
    let direct = format_table_row(&back);

    // A pool of 240 losses built to have exactly these statistics: 237 at the
    // median, one at the minimum, and two outliers fixed by the mean and std.
    let n = 240.0;
    let mut values = vec![2.55];
    values.extend(std::iter::repeat_n(3.73, 237));
    let rest_sum: f64 = values.iter().sum();
    let rest_sq: f64 = values.iter().map(|x| x * x).sum();
    let s = n * 251.93 - rest_sum;
    let q = n * (3833.71f64.powi(2) + 251.93f64.powi(2)) - rest_sq;
    let half_gap = (2.0 * q - s * s).sqrt() / 2.0;
    values.push(s / 2.0 + half_gap);
    values.push(s / 2.0 - half_gap);
    let pooled = format_table_row(&summarize(&values).unwrap());
    outcome(
        direct == ROW && pooled == ROW,
        format!("stored row \"{direct}\", pooled 240 values \"{pooled}\""),
    )
}

fn main() {
    let base = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    let (first, second) = (base.join("run-a"), base.join("run-b"));
    let criteria: Vec<Criterion> = vec![
        ("oracle equivalence", Box::new(oracle_equivalence)),
        ("velocity fixed point", Box::new(velocity_fixed_points)),
        ("momentum convergence", Box::new(momentum_convergence)),
        ("empirical contraction", Box::new(empirical_contraction)),
        ("branch coverage", Box::new(branch_coverage)),
        (
            "miniature protocol",
            Box::new({
                let first = first.clone();
                move || miniature_protocol(&first)
            }),
        ),
        ("gradient correctness", Box::new(gradient_correctness)),
        (
            "determinism",
            Box::new(move || determinism(&first, &second)),
        ),
        ("table fixture", Box::new(table_fixture)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.into_iter().enumerate() {
        let o = run();
        if !o.passed {
            failed += 1;
        }
        println!(
            "criterion {} {:<22} {}  {}",
            i + 1,
            name,
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!("acceptance: {} of 9 criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
