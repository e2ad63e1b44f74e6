//! Scalar search used to calibrate boundary constants.

use crate::error::{DesignError, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a minimum of `f` on `[lo, hi]`.
///
/// Stops when the bracket is narrower than `tol` and returns the best point
/// evaluated. On equal values the left part of the bracket is kept.
pub fn golden_section_min<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut best = if fc <= fd { (c, fc) } else { (d, fd) };
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
            if fc <= best.1 {
                best = (c, fc);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
            if fd < best.1 {
                best = (d, fd);
            }
        }
    }
    best
}

/// How a boundary constant is tuned to a target rejection rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationOptions {
    /// Initial search bracket for the constant.
    pub bracket: (f64, f64),
    /// Width of the final bracket.
    pub tol: f64,
    /// Require the achieved rate to be at or below the target
    /// (minimise `(target - rate)^2` if `rate <= target`, 1 otherwise).
    pub strict: bool,
    /// Number of times each bracket end may be pushed outwards by a factor of two.
    pub max_expansions: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions {
            bracket: (0.3, 12.0),
            tol: 1e-4,
            strict: false,
            max_expansions: 10,
        }
    }
}

/// Finds the constant `x` whose rejection rate `rate(x)` best matches `target`.
///
/// `rate` must be non-increasing in `x`. Returns `(x, rate(x))`.
pub fn calibrate_to_rate<F: Fn(f64) -> f64>(
    rate: F,
    target: f64,
    opts: &CalibrationOptions,
) -> Result<(f64, f64)> {
    let (mut lo, mut hi) = opts.bracket;
    let mut rate_lo = rate(lo);
    let mut rate_hi = rate(hi);
    let mut expansions = 0;
    while (rate_lo < target || rate_hi > target) && expansions < opts.max_expansions {
        if rate_lo < target {
            lo /= 2.0;
            rate_lo = rate(lo);
        }
        if rate_hi > target {
            hi *= 2.0;
            rate_hi = rate(hi);
        }
        expansions += 1;
    }
    if rate_lo < target || rate_hi > target {
        return Err(DesignError::Bracket {
            target,
            lo,
            hi,
            rate_lo,
            rate_hi,
        });
    }

    let x = if opts.strict {
        // The strict objective is minimised by the smallest constant whose
        // rate does not exceed the target; rate is monotone so bisect for it.
        let (mut a, mut b) = (lo, hi);
        while b - a > opts.tol {
            let mid = 0.5 * (a + b);
            if rate(mid) <= target {
                b = mid;
            } else {
                a = mid;
            }
        }
        b
    } else {
        golden_section_min(|x| (target - rate(x)).powi(2), lo, hi, opts.tol).0
    };
    Ok((x, rate(x)))
}
