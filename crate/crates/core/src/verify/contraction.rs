//! Empirical Lipschitz ratio of the velocity map over sampled pairs.

use rand::Rng;
use serde::Serialize;

use super::fixed_point::VelocityMap;
use crate::rng;

/// `√v` is not Lipschitz at 0; pairs with a coordinate below this are skipped.
pub const EXCLUSION_RADIUS: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionReport {
    /// `max d(Tx, Ty) / d(x, y)` over the evaluated pairs (Euclidean norm).
    pub max_ratio: f64,
    pub evaluated: usize,
    pub skipped_identical: usize,
    /// Pairs with a coordinate inside the exclusion radius around 0.
    pub excluded_near_zero: usize,
    pub ratios_at_least_one: usize,
    /// Largest ratio among pairs drawn with `g >= 0`.
    pub max_ratio_nonnegative_g: f64,
}

/// Draws `samples` pairs uniformly from `region²` with one `g` per pair from
/// `g_range`, and measures how much the map `T` for that `g` stretches them.
pub fn contraction_ratio(
    samples: usize,
    region: Bounds,
    g_range: Bounds,
    alpha: f64,
    seed: u64,
) -> ContractionReport {
    let mut r = rng::rng(seed);
    let mut report = ContractionReport {
        max_ratio: 0.0,
        evaluated: 0,
        skipped_identical: 0,
        excluded_near_zero: 0,
        ratios_at_least_one: 0,
        max_ratio_nonnegative_g: 0.0,
    };
    let draw = |r: &mut rand_chacha::ChaCha8Rng, b: Bounds| {
        if b.hi > b.lo {
            r.random_range(b.lo..=b.hi)
        } else {
            b.lo
        }
    };
    for _ in 0..samples {
        let x = (draw(&mut r, region), draw(&mut r, region));
        let y = (draw(&mut r, region), draw(&mut r, region));
        let g = draw(&mut r, g_range);
        if [x.0, x.1, y.0, y.1].iter().any(|v| *v < EXCLUSION_RADIUS) {
            report.excluded_near_zero += 1;
            continue;
        }
        let d = ((x.0 - y.0).powi(2) + (x.1 - y.1).powi(2)).sqrt();
        if d == 0.0 {
            report.skipped_identical += 1;
            continue;
        }
        let t = VelocityMap::sparse(g, alpha);
        let (tx, ty) = (t.apply(x), t.apply(y));
        let ratio = ((tx.0 - ty.0).powi(2) + (tx.1 - ty.1).powi(2)).sqrt() / d;
        report.evaluated += 1;
        report.max_ratio = report.max_ratio.max(ratio);
        if g >= 0.0 {
            report.max_ratio_nonnegative_g = report.max_ratio_nonnegative_g.max(ratio);
        }
        if ratio >= 1.0 {
            report.ratios_at_least_one += 1;
        }
    }
    report
}
