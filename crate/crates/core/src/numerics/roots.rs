//! Bracketing and bisection.

/// Bisects `f` on `[lo, hi]`, which must bracket a sign change, until the
/// bracket is narrower than `x_tol`. Returns `None` without a sign change.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, x_tol: f64) -> Option<f64> {
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Some(lo);
    }
    if f_hi == 0.0 {
        return Some(hi);
    }
    if !(f_lo.is_finite() && f_hi.is_finite()) || f_lo.signum() == f_hi.signum() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= x_tol || mid == lo || mid == hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Some(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Evaluates `f` at `samples + 1` evenly spaced points of `[lo, hi]` and
/// returns every adjacent pair whose values change sign.
pub fn sign_change_brackets<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, samples: usize) -> Vec<(f64, f64)> {
    let samples = samples.max(1);
    let step = (hi - lo) / samples as f64;
    let mut out = Vec::new();
    let mut x_prev = lo;
    let mut f_prev = f(lo);
    for i in 1..=samples {
        let x = if i == samples { hi } else { lo + step * i as f64 };
        let fx = f(x);
        if f_prev.is_finite() && fx.is_finite() && (f_prev == 0.0 || f_prev.signum() != fx.signum()) {
            out.push((x_prev, x));
        }
        x_prev = x;
        f_prev = fx;
    }
    out
}
