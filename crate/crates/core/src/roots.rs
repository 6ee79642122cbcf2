//! Derivative-free bracketed root finding.

use crate::error::{Error, Result};

/// Bisects `f` on `[lo, hi]` down to adjacent floats, then tries one secant
/// step through the final bracket and keeps whichever point has the smaller
/// residual.
///
/// `f(lo)` and `f(hi)` must be finite with opposite signs.
pub fn bisect_secant<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> Result<f64> {
    let (mut lo, mut hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut flo = f(lo);
    let fhi = f(hi);
    if !flo.is_finite() || !fhi.is_finite() {
        return Err(Error::RootFinding {
            lo,
            hi,
            reason: "non-finite function value at bracket end".into(),
        });
    }
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::RootFinding {
            lo,
            hi,
            reason: format!("no sign change (f(lo) = {flo:e}, f(hi) = {fhi:e})"),
        });
    }
    let mut fhi = fhi;
    for _ in 0..4000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fmid = f(mid);
        if fmid == 0.0 {
            return Ok(mid);
        }
        if !fmid.is_finite() {
            return Err(Error::RootFinding {
                lo,
                hi,
                reason: format!("non-finite function value at {mid}"),
            });
        }
        if fmid.signum() == flo.signum() {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
            fhi = fmid;
        }
    }
    let (mut best, mut fbest) = if flo.abs() <= fhi.abs() { (lo, flo) } else { (hi, fhi) };
    if fhi != flo {
        let secant = hi - fhi * (hi - lo) / (fhi - flo);
        if secant > lo && secant < hi {
            let fs = f(secant);
            if fs.abs() < fbest.abs() {
                best = secant;
                fbest = fs;
            }
        }
    }
    let _ = fbest;
    Ok(best)
}
