//! Bracketed scalar root finding.

use crate::error::{Error, Result};

/// Root of `f(x) = target` for continuous increasing `f` on `[lo, hi]`,
/// by regula falsi with the Illinois modification, falling back to
/// bisection whenever the secant point leaves the inner half of the
/// bracket. Stops once `|f(x) - target| <= tol`.
pub fn solve_increasing<F: Fn(f64) -> f64>(
    f: F,
    target: f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<f64> {
    let mut flo = f(lo) - target;
    let mut fhi = f(hi) - target;
    if flo.abs() <= tol {
        return Ok(lo);
    }
    if fhi.abs() <= tol {
        return Ok(hi);
    }
    if !(flo < 0.0 && fhi > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "target {target} is not bracketed by [{lo}, {hi}]"
        )));
    }
    let mut side = 0i8;
    for _ in 0..400 {
        let width = hi - lo;
        let mut x = lo - flo * width / (fhi - flo);
        if !(x > lo + 0.01 * width && x < hi - 0.01 * width) {
            x = lo + 0.5 * width;
        }
        if x <= lo || x >= hi {
            // bracket is down to adjacent floats
            return Ok(if flo.abs() < fhi.abs() { lo } else { hi });
        }
        let fx = f(x) - target;
        if fx.abs() <= tol {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
            flo = fx;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            fhi = fx;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        }
    }
    Ok(0.5 * (lo + hi))
}
