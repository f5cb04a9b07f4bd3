//! Hausdorff distance between finite point sets.
//!
//! `hausdorff` is the plain quadratic computation. `hausdorff_below` answers
//! only whether the distance is under a threshold and stops as soon as the
//! answer is known: a point with no partner closer than the threshold ends
//! the whole computation, and the scan for a point's partner stops at the
//! first one closer than the threshold.

use thiserror::Error;

use crate::turtle::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum HausdorffError {
    #[error("Hausdorff distance is undefined for an empty point set")]
    EmptySet,
}

fn check(x: &[Point], y: &[Point]) -> Result<(), HausdorffError> {
    if x.is_empty() || y.is_empty() {
        Err(HausdorffError::EmptySet)
    } else {
        Ok(())
    }
}

fn directed_sq(x: &[Point], y: &[Point]) -> f64 {
    let mut worst = 0.0f64;
    for &a in x {
        let mut best = f64::INFINITY;
        for &b in y {
            let d = a.dist_sq(b);
            if d < best {
                best = d;
            }
        }
        if best > worst {
            worst = best;
        }
    }
    worst
}

/// Symmetric Hausdorff distance.
pub fn hausdorff(x: &[Point], y: &[Point]) -> Result<f64, HausdorffError> {
    check(x, y)?;
    Ok(directed_sq(x, y).max(directed_sq(y, x)).sqrt())
}

/// One-sided distance `max_{a in x} min_{b in y} |a - b|`.
pub fn directed_hausdorff(x: &[Point], y: &[Point]) -> Result<f64, HausdorffError> {
    check(x, y)?;
    Ok(directed_sq(x, y).sqrt())
}

/// `d < alpha` evaluated on a squared distance. Squaring `alpha` can round,
/// so values within a few ulps of the threshold are settled with an exact
/// square root, which keeps the answer identical to `hausdorff(..) < alpha`.
#[inline]
fn closer_than(d_sq: f64, alpha: f64, alpha_sq: f64) -> bool {
    if d_sq < alpha_sq * (1.0 - 1e-12) {
        true
    } else if d_sq > alpha_sq * (1.0 + 1e-12) {
        false
    } else {
        d_sq.sqrt() < alpha
    }
}

fn directed_below(x: &[Point], y: &[Point], alpha: f64, alpha_sq: f64) -> bool {
    'outer: for &a in x {
        for &b in y {
            if closer_than(a.dist_sq(b), alpha, alpha_sq) {
                continue 'outer;
            }
        }
        return false;
    }
    true
}

/// Whether `hausdorff(x, y) < alpha`, without computing the distance.
/// A non-positive or NaN `alpha` is never beaten.
pub fn hausdorff_below(x: &[Point], y: &[Point], alpha: f64) -> Result<bool, HausdorffError> {
    check(x, y)?;
    if alpha.is_nan() || alpha <= 0.0 {
        return Ok(false);
    }
    if alpha == f64::INFINITY {
        return Ok(true);
    }
    let alpha_sq = alpha * alpha;
    Ok(directed_below(x, y, alpha, alpha_sq) && directed_below(y, x, alpha, alpha_sq))
}
