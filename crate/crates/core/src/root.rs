use crate::error::{Error, Result};
use crate::num::Real;

/// Bisection for a root of `f` in `[lo, hi]`; stops once the bracket is
/// narrower than `tol` or has reached machine resolution.
pub fn bisect<T, F>(f: F, mut lo: T, mut hi: T, tol: T) -> Result<T>
where
    T: Real,
    F: Fn(T) -> T,
{
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == T::zero() {
        return Ok(lo);
    }
    if f_hi == T::zero() {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() || f_lo.is_nan() || f_hi.is_nan() {
        return Err(Error::NoBracket {
            lo: lo.as_f64(),
            hi: hi.as_f64(),
        });
    }
    let half = T::lit(0.5);
    for _ in 0..2048 {
        let mid = lo + half * (hi - lo);
        if hi - lo <= tol || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let f_mid = f(mid);
        if f_mid == T::zero() {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo + half * (hi - lo))
}
