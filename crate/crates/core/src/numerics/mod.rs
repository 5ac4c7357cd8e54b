//! Small numerical kernels shared by the physics modules.

pub mod quad;
pub mod roots;
pub mod tridiag;

/// `sin(u)/u`, with a series branch near the origin.
pub fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-4 {
        let u2 = u * u;
        1.0 - u2 / 6.0 + u2 * u2 / 120.0
    } else {
        u.sin() / u
    }
}

/// `sin²(u)`, snapped to exactly zero when `u` is a multiple of π up to rounding.
///
/// Trapping states are defined by exact sine zeros. Without the snap the
/// running product would carry a spurious `1e-32` instead of a hard zero.
pub fn sin_sq_snapped(u: f64) -> f64 {
    let k = (u / std::f64::consts::PI).round();
    if k != 0.0 && (u - k * std::f64::consts::PI).abs() <= 64.0 * f64::EPSILON * u.abs() {
        return 0.0;
    }
    let s = u.sin();
    s * s
}

/// Numerically stable `ln Σ exp(v_i)`, skipping `-inf` entries.
pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = values.iter().filter(|v| v.is_finite()).map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sinc_series_matches_direct() {
        for &u in &[1e-5, 5e-5, 9.9e-5, 1e-4, 2e-4] {
            assert!((sinc(u) - u.sin() / u).abs() < 1e-15);
        }
        assert_eq!(sinc(0.0), 1.0);
    }

    #[test]
    fn snapped_sine_hits_zero_at_multiples_of_pi() {
        assert_eq!(sin_sq_snapped(PI), 0.0);
        assert_eq!(sin_sq_snapped(7.0 * PI), 0.0);
        let theta = PI / (0.37f64).sqrt();
        assert_eq!(sin_sq_snapped(theta * (0.37f64).sqrt()), 0.0);
        assert!(sin_sq_snapped(PI + 1e-9) > 0.0);
        assert!((sin_sq_snapped(PI / 2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn logsumexp_handles_extremes() {
        assert!((logsumexp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(logsumexp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert!((logsumexp(&[0.0, f64::NEG_INFINITY]) - 0.0).abs() < 1e-15);
    }
}
