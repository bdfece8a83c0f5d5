//! Fixed points of the scalar velocity map under a constant gradient.
//!
//! [`velocity_map`] is the map `T(v1, v2) = (α v1 + c (g − √v2)², α v2 + (1 − α)(g − √v1)²)`
//! with both components computed from the same input pair, `c = 1 − α` on
//! the sparse branch and `c = 1 − β₂` on the dense one. Iterated from the
//! origin with `g > 0` on the sparse branch the iterates stay on the diagonal
//! and contract at rate `|2α − 1|` toward `v1 = v2 = g²/4`.
//!
//! The optimizer applies the two updates sequentially instead. That map fixes
//! every point of the curve `√v1 + √v2 = g` and its limit from the origin lies
//! off the diagonal; [`sequential_fixed_point`] reports where it lands.

use serde::Serialize;

use crate::optim::GradientMode;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VelocityMap {
    pub g: f64,
    pub alpha: f64,
    /// Only used on the dense branch.
    pub beta2: f64,
    pub mode: GradientMode,
}

impl VelocityMap {
    pub fn sparse(g: f64, alpha: f64) -> Self {
        Self {
            g,
            alpha,
            beta2: 0.999,
            mode: GradientMode::Sparse,
        }
    }

    fn v1_coef(&self) -> f64 {
        match self.mode {
            GradientMode::Sparse => 1.0 - self.alpha,
            GradientMode::Dense => 1.0 - self.beta2,
        }
    }

    pub fn apply(&self, v: (f64, f64)) -> (f64, f64) {
        let (v1, v2) = v;
        (
            self.alpha * v1 + self.v1_coef() * (self.g - v2.sqrt()).powi(2),
            self.alpha * v2 + (1.0 - self.alpha) * (self.g - v1.sqrt()).powi(2),
        )
    }

    /// `v1` from the old `v2`, then `v2` from the new `v1`.
    pub fn apply_sequential(&self, v: (f64, f64)) -> (f64, f64) {
        let v1 = self.alpha * v.0 + self.v1_coef() * (self.g - v.1.sqrt()).powi(2);
        let v2 = self.alpha * v.1 + (1.0 - self.alpha) * (self.g - v1.sqrt()).powi(2);
        (v1, v2)
    }

    /// Defects of the stationarity identities
    /// `(g − √v2)² = (v1 − α v1)/c` and `(g − √v1)² = (v2 − α v2)/(1 − α)`.
    pub fn residuals(&self, v: (f64, f64)) -> (f64, f64) {
        let (v1, v2) = v;
        (
            (self.g - v2.sqrt()).powi(2) - (v1 - self.alpha * v1) / self.v1_coef(),
            (self.g - v1.sqrt()).powi(2) - (v2 - self.alpha * v2) / (1.0 - self.alpha),
        )
    }
}

/// Convenience wrapper for [`velocity_map`].
pub fn velocity_map(map: &VelocityMap, v: (f64, f64)) -> (f64, f64) {
    map.apply(v)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointReport {
    pub g: f64,
    pub alpha: f64,
    pub mode: GradientMode,
    pub v1_star: f64,
    pub v2_star: f64,
    pub iterations: usize,
    /// Largest absolute stationarity defect at the reported point.
    pub residual: f64,
    pub converged: bool,
}

fn iterate(
    map: &VelocityMap,
    tol: f64,
    cap: usize,
    step: impl Fn(&VelocityMap, (f64, f64)) -> (f64, f64),
) -> FixedPointReport {
    assert!(tol > 0.0, "tolerance must be positive");
    let mut v = (0.0, 0.0);
    let mut iterations = 0;
    let mut settled = false;
    while iterations < cap {
        let next = step(map, v);
        iterations += 1;
        let change = (next.0 - v.0).abs().max((next.1 - v.1).abs());
        v = next;
        if !v.0.is_finite() || !v.1.is_finite() {
            break;
        }
        if change < tol {
            settled = true;
            break;
        }
    }
    let (r1, r2) = map.residuals(v);
    let residual = r1.abs().max(r2.abs());
    FixedPointReport {
        g: map.g,
        alpha: map.alpha,
        mode: map.mode,
        v1_star: v.0,
        v2_star: v.1,
        iterations,
        residual,
        converged: settled || residual <= tol,
    }
}

/// Iterates [`VelocityMap::apply`] from `(0, 0)` until successive iterates
/// differ by less than `tol` or `cap` iterations have run. Hitting the cap is
/// reported through `converged = false`, not as an error.
pub fn velocity_fixed_point(map: &VelocityMap, tol: f64, cap: usize) -> FixedPointReport {
    iterate(map, tol, cap, VelocityMap::apply)
}

/// Same, for the sequential ordering used by the optimizer.
pub fn sequential_fixed_point(map: &VelocityMap, tol: f64, cap: usize) -> FixedPointReport {
    iterate(map, tol, cap, VelocityMap::apply_sequential)
}
