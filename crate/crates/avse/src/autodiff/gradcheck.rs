//! Central finite-difference utilities for verifying analytic gradients.
//!
//! Checks run at `f64`; the engine is generic so the exact training code
//! path is what gets differentiated numerically.

/// Default probe step for central differences.
pub const DEFAULT_H: f64 = 1e-4;

/// Central difference of `f` along coordinate `idx`.
pub fn central_diff_at(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], idx: usize, h: f64) -> f64 {
    let mut xp = x.to_vec();
    xp[idx] = x[idx] + h;
    let fp = f(&xp);
    xp[idx] = x[idx] - h;
    let fm = f(&xp);
    (fp - fm) / (2.0 * h)
}

/// Full numeric gradient of `f` at `x`.
pub fn central_diff(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len()).map(|i| central_diff_at(f, x, i, h)).collect()
}

/// `|a - n| / max(|a|, |n|, floor)`: relative error with an absolute floor
/// so near-zero gradients compare on an absolute scale.
pub fn rel_err(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Worst relative error across a gradient vector.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric.iter())
        .map(|(&a, &n)| rel_err(a, n, floor))
        .fold(0.0, f64::max)
}
