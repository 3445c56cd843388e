//! Bracketing and bisection for the monotone score equations.

use crate::error::{Error, Result};

/// Relative width at which production solvers stop.
pub const REL_TOL: f64 = 1e-12;
const MAX_ITER: usize = 400;

/// Root of `f` on `[lo, hi]` by bisection. `f(lo)` and `f(hi)` must have
/// opposite signs (or one of them be zero).
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, rel_tol: f64) -> Result<f64> {
    if !(lo <= hi) {
        return Err(Error::param(format!("empty bracket [{lo}, {hi}]")));
    }
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() || f_lo.is_nan() || f_hi.is_nan() {
        return Err(Error::NoBracket { lo, hi });
    }
    for _ in 0..MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= rel_tol * hi.abs().max(f64::MIN_POSITIVE) || mid == lo || mid == hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Doubles the distance from `start` until `f` changes sign relative to
/// `f(start)`. Returns the bracket, or `None` once `cap` is passed.
pub fn bracket_up<F: FnMut(f64) -> f64>(mut f: F, start: f64, cap: f64) -> Option<(f64, f64)> {
    let s0 = f(start).signum();
    let mut lo = start;
    let mut step = start.abs().max(1.0);
    loop {
        let hi = (start + step).min(cap);
        let v = f(hi);
        if v == 0.0 || v.signum() != s0 {
            return Some((lo, hi));
        }
        if hi >= cap {
            return None;
        }
        lo = hi;
        step *= 2.0;
    }
}

/// Largest integer `n` in `[lo, cap]` with `keep(n)` true, for a predicate
/// that is true up to some point and false after. `keep(lo)` is assumed.
/// Returns `(n, hit_cap)`.
pub fn last_true<F: FnMut(u64) -> bool>(mut keep: F, lo: u64, cap: u64) -> (u64, bool) {
    if keep(cap) {
        return (cap, true);
    }
    let (mut good, mut bad) = (lo, cap);
    let mut step = 1u64;
    // Gallop first so small answers stay cheap.
    while good.saturating_add(step) < bad {
        let probe = good + step;
        if keep(probe) {
            good = probe;
            step = step.saturating_mul(2);
        } else {
            bad = probe;
            break;
        }
    }
    while bad - good > 1 {
        let mid = good + (bad - good) / 2;
        if keep(mid) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    (good, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-15).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn bisect_requires_sign_change() {
        assert!(matches!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-9), Err(Error::NoBracket { .. })));
    }

    #[test]
    fn bracket_found_and_capped() {
        let (lo, hi) = bracket_up(|x| x - 37.5, 1.0, 1e6).unwrap();
        assert!(lo <= 37.5 && 37.5 <= hi);
        assert!(bracket_up(|x| x - 1e9, 1.0, 1e6).is_none());
    }

    #[test]
    fn last_true_cases() {
        assert_eq!(last_true(|n| n <= 6, 3, 1000), (6, false));
        assert_eq!(last_true(|n| n <= 3, 3, 1000), (3, false));
        assert_eq!(last_true(|_| true, 3, 1000), (1000, true));
        assert_eq!(last_true(|n| n <= 999, 0, 1000), (999, false));
    }

    proptest::proptest! {
        #[test]
        fn last_true_matches_scan(lo in 0u64..50, span in 1u64..500, cut in 0u64..600) {
            let cap = lo + span;
            let cut = cut.max(lo);
            let (n, capped) = last_true(|n| n <= cut, lo, cap);
            proptest::prop_assert_eq!(n, cut.min(cap));
            proptest::prop_assert_eq!(capped, cut >= cap);
        }
    }
}
