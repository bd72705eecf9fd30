//! Bracketed bisection.

use crate::error::{Error, Result};

pub const MAX_ITER: usize = 200;

/// Finds a sign change of `f` in `[lo, hi]` to relative width `rel_tol`.
///
/// Returns the midpoint of the final bracket. An exact zero at either end is
/// returned directly.
pub fn bisect<F: FnMut(f64) -> f64>(f: F, lo: f64, hi: f64, rel_tol: f64) -> Result<f64> {
    bisect_until(f, lo, hi, |a, b| (b - a) <= rel_tol * (0.5 * (a + b)).abs())
}

/// Bisection in `ln x` for a positive bracket spanning many decades.
pub fn bisect_log<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, rel_tol: f64) -> Result<f64> {
    if !(lo > 0.0 && hi > 0.0) {
        return Err(Error::Bracket(format!("log bracket needs positive ends, got [{lo}, {hi}]")));
    }
    let t = bisect_until(|t: f64| f(t.exp()), lo.ln(), hi.ln(), |a, b| b - a <= rel_tol)?;
    Ok(t.exp())
}

fn bisect_until<F, D>(mut f: F, lo: f64, hi: f64, done: D) -> Result<f64>
where
    F: FnMut(f64) -> f64,
    D: Fn(f64, f64) -> bool,
{
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let (fa, fb) = (f(a), f(b));
    if fa.is_nan() || fb.is_nan() {
        return Err(Error::Bracket(format!("NaN at bracket ends [{a}, {b}]")));
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Bracket(format!("f({a:e})={fa:e} and f({b:e})={fb:e} share a sign")));
    }
    let neg_at_a = fa < 0.0;
    for _ in 0..MAX_ITER {
        let mid = 0.5 * (a + b);
        if done(a, b) || mid <= a || mid >= b {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm.is_nan() {
            return Err(Error::Bracket(format!("NaN at {mid:e}")));
        }
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm < 0.0) == neg_at_a {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sqrt_two() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-15).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn no_bracket() {
        assert!(matches!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12), Err(Error::Bracket(_))));
    }

    #[test]
    fn log_bracket() {
        let r = bisect_log(|x: f64| x.ln() - 20.0, 1.0, 1e20, 1e-14).unwrap();
        assert!((r / 20f64.exp() - 1.0).abs() < 1e-13);
    }

    proptest! {
        #[test]
        fn finds_linear_root(root in -100.0f64..100.0, slope in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0]) {
            let r = bisect(|x| slope * (x - root), -200.0, 200.0, 1e-14).unwrap();
            prop_assert!((r - root).abs() <= 1e-11 * (1.0 + root.abs()));
        }
    }
}
