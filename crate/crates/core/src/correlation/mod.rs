//! Master-equation generator, its spectral gap and the correlation length.
//!
//! `L` is the one-step birth-death generator with `dp/dt = −γ L p`. Detailed
//! balance makes it similar to a symmetric tridiagonal matrix, which factors
//! as `BᵀB` with `B` bidiagonal, so the gap is the square of the smallest
//! singular value of `B`.

mod approx;
mod atoms;

pub use approx::{
    ansatz_from_moments, barrier_estimate, chi, master_estimate, master_peak, mean_field_curve, mean_field_peak,
    mean_field_point, q_derivative, xi_ansatz_e, xi_barrier, xi_master_m, xi_mean_field, xi_mean_field_point,
    xi_sumrule, xi_thermal_limit, BarrierEstimate, MasterEstimate, MeanFieldPeak, MeanFieldPoint,
};
pub use atoms::{atom_statistics, gamma_a, joint_probability, AtomCorrelator, AtomStatistics, Spin};

use crate::distribution::{down_rate, stationary_distribution, stationary_log_weights, up_rate, DEFAULT_TAIL_TOL};
use crate::error::{Error, Result};
use crate::model::MaserParams;
use crate::numerics::logsumexp;
use crate::numerics::tridiag::{smallest_singular_value, SymTridiagonal};

/// Extra rows kept beyond the adaptive distribution cutoff.
pub const GUARD_ROWS: usize = 16;

/// Gaps below this are reported through the barrier formula instead.
pub const GAP_UNDERFLOW: f64 = 1e-280;

const MIN_DIM: usize = 8;
const TOP_WEIGHT_TOL: f64 = 1e-12;

/// How a correlation length was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Exact,
    AnsatzE,
    MasterM,
    MeanField,
    Barrier,
    SumRule,
}

/// A correlation length `γξ = 1/λ_nz` in units of the cavity lifetime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationResult {
    pub lambda_nz: f64,
    pub gamma_xi: f64,
    /// `ln γξ`, finite even when `γξ` overflows.
    pub ln_gamma_xi: f64,
    pub method: Method,
    /// Set when the spectral gap underflowed and the barrier formula was used.
    pub asymptotic: bool,
}

impl CorrelationResult {
    fn from_gap(lambda_nz: f64, method: Method) -> Self {
        Self { lambda_nz, gamma_xi: 1.0 / lambda_nz, ln_gamma_xi: -lambda_nz.ln(), method, asymptotic: false }
    }
}

/// Truncated generator `L = L_C − N(M − 1)` on photon numbers `0..dim`.
///
/// The last state only decays, so every column of `L` sums to zero and the
/// truncated `p̄` is stationary. When `n_b = 0` and a trapping zero cuts the
/// ladder, only the leading block `0..support` carries weight.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    pub params: MaserParams,
    pub dim: usize,
    /// `L_{n+1,n} = −up_n`.
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    /// `L_{n,n+1} = −down_{n+1}`.
    pub sup: Vec<f64>,
    /// Rate of `n → n+1`; zero in the last row.
    pub up: Vec<f64>,
    /// Rate of `n → n−1`; zero in the first row.
    pub down: Vec<f64>,
    /// Normalized `p̄` on `0..dim`.
    pub stationary: Vec<f64>,
    /// `ln p̄_n`, `-inf` for exact zeros.
    pub log_stationary: Vec<f64>,
    /// `D^{−1/2} L D^{1/2}` restricted to the leading block.
    pub symmetrized: SymTridiagonal,
    /// Length of the leading block with `p̄ > 0`.
    pub support: usize,
}

impl GeneratorMatrix {
    /// True when a trapping zero splits the ladder inside `0..dim`.
    pub fn block_decoupled(&self) -> bool {
        self.support < self.dim
    }

    /// `p̄_{dim−1}` relative to the largest weight.
    pub fn top_weight(&self) -> f64 {
        let max = self.stationary.iter().copied().fold(0.0, f64::max);
        self.stationary[self.dim - 1] / max
    }

    /// `L·v` on the full truncation.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim);
        (0..self.dim)
            .map(|n| {
                let mut acc = self.diag[n] * v[n];
                if n > 0 {
                    acc += self.sub[n - 1] * v[n - 1];
                }
                if n + 1 < self.dim {
                    acc += self.sup[n] * v[n + 1];
                }
                acc
            })
            .collect()
    }
}

/// Builds the truncated generator and its symmetrized form.
pub fn build_generator(params: &MaserParams, dim: usize) -> Result<GeneratorMatrix> {
    params.validate()?;
    if dim < MIN_DIM {
        return Err(Error::Truncation { dim, reason: format!("dimension must be at least {MIN_DIM}") });
    }
    let mut up: Vec<f64> = (0..dim).map(|n| up_rate(n, params)).collect();
    up[dim - 1] = 0.0;
    let down: Vec<f64> = (0..dim).map(|n| down_rate(n, params)).collect();
    let diag: Vec<f64> = (0..dim).map(|n| up[n] + down[n]).collect();
    let sub: Vec<f64> = up[..dim - 1].iter().map(|u| -u).collect();
    let sup: Vec<f64> = down[1..].iter().map(|d| -d).collect();

    let mut log_stationary = stationary_log_weights(params, dim);
    let lse = logsumexp(&log_stationary);
    for lw in &mut log_stationary {
        *lw -= lse;
    }
    let stationary: Vec<f64> = log_stationary.iter().map(|lw| lw.exp()).collect();
    let support = up[..dim - 1].iter().position(|&u| u == 0.0).map_or(dim, |n| n + 1);

    let off = (0..support - 1).map(|n| -(up[n] * down[n + 1]).sqrt()).collect();
    let symmetrized = SymTridiagonal::new(diag[..support].to_vec(), off);
    Ok(GeneratorMatrix {
        params: *params,
        dim,
        sub,
        diag,
        sup,
        up,
        down,
        stationary,
        log_stationary,
        symmetrized,
        support,
    })
}

/// Smallest nonzero eigenvalue of `L` on the leading block.
pub fn lambda_nz(gen: &GeneratorMatrix) -> Result<f64> {
    if gen.support < 2 {
        return Err(Error::Domain("stationary state is a single photon number".into()));
    }
    if !gen.block_decoupled() && gen.top_weight() > TOP_WEIGHT_TOL {
        return Err(Error::Truncation { dim: gen.dim, reason: format!("top weight {:e}", gen.top_weight()) });
    }
    let m = gen.support;
    let d: Vec<f64> = gen.up[..m - 1].iter().map(|u| u.sqrt()).collect();
    let e: Vec<f64> = gen.down[1..m].iter().map(|v| v.sqrt()).collect();
    let sigma = smallest_singular_value(&d, &e);
    Ok(sigma * sigma)
}

/// Default truncation: the adaptive distribution cutoff plus guard rows.
pub fn correlation_dim(params: &MaserParams) -> Result<usize> {
    let dist = stationary_distribution(params, DEFAULT_TAIL_TOL)?;
    Ok((dist.len() + GUARD_ROWS).max(MIN_DIM))
}

/// Relative change of `λ_nz` when the truncation doubles from `dim`.
pub fn truncation_shift(params: &MaserParams, dim: usize) -> Result<f64> {
    let small = lambda_nz(&build_generator(params, dim)?)?;
    let large = lambda_nz(&build_generator(params, 2 * dim)?)?;
    Ok((large - small).abs() / large)
}

/// Exact correlation length at the default truncation.
///
/// Falls back to the barrier formula, flagged `asymptotic`, when the gap
/// underflows.
pub fn exact_correlation(params: &MaserParams) -> Result<CorrelationResult> {
    let dim = correlation_dim(params)?;
    exact_correlation_with_dim(params, dim)
}

pub fn exact_correlation_with_dim(params: &MaserParams, dim: usize) -> Result<CorrelationResult> {
    let gen = build_generator(params, dim)?;
    let gap = lambda_nz(&gen)?;
    if gap < GAP_UNDERFLOW {
        let b = barrier_estimate(params)?;
        return Ok(CorrelationResult {
            lambda_nz: gap,
            gamma_xi: b.gamma_xi,
            ln_gamma_xi: b.ln_gamma_xi,
            method: Method::Barrier,
            asymptotic: true,
        });
    }
    Ok(CorrelationResult::from_gap(gap, Method::Exact))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, SymmetricEigen};
    use proptest::prelude::*;

    fn fig1(theta: f64, flux: f64) -> MaserParams {
        MaserParams::new(1.0, 0.15, 0.0, theta, flux).unwrap()
    }

    /// Dense matrix of `L` built straight from the `L_C`, `M(±)` element formulas.
    fn dense_generator(p: &MaserParams, dim: usize) -> DMatrix<f64> {
        let nf = p.flux;
        let q = |n: usize| crate::model::q(n as f64 / nf, p.theta, p.delta).unwrap();
        let mut l = DMatrix::zeros(dim, dim);
        for m in 0..dim {
            for n in 0..dim {
                let nn = n as f64;
                let kron = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
                let lc = (p.nb + 1.0) * (nn * kron(n, m) - (nn + 1.0) * kron(n + 1, m))
                    + p.nb * ((nn + 1.0) * kron(n, m) - nn * kron(n, m + 1));
                let mp = p.b() * q(n + 1) * kron(n + 1, m) + p.a * (1.0 - q(n + 1)) * kron(n, m);
                let mn = p.a * q(n) * kron(n, m + 1) + p.b() * (1.0 - q(n)) * kron(n, m);
                l[(n, m)] = lc - nf * (mp + mn - kron(n, m));
            }
        }
        // The last state only decays: drop the outflow to `dim`.
        let last = dim - 1;
        l[(last, last)] -= p.nb * dim as f64 + nf * p.a * q(dim);
        l
    }

    fn dense_gap(gen: &GeneratorMatrix) -> f64 {
        let m = gen.support;
        let mut s = DMatrix::zeros(m, m);
        for i in 0..m {
            s[(i, i)] = gen.symmetrized.diag[i];
            if i + 1 < m {
                s[(i, i + 1)] = gen.symmetrized.off[i];
                s[(i + 1, i)] = gen.symmetrized.off[i];
            }
        }
        let mut ev: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev[1]
    }

    #[test]
    fn bands_match_element_formulas() {
        let p = MaserParams::new(0.8, 0.3, 0.4, 3.7, 20.0).unwrap();
        let gen = build_generator(&p, 40).unwrap();
        let dense = dense_generator(&p, 40);
        for n in 0..40 {
            assert!((gen.diag[n] - dense[(n, n)]).abs() < 1e-11 * dense[(n, n)].abs().max(1.0), "n = {n}");
            if n + 1 < 40 {
                assert!((gen.sub[n] - dense[(n + 1, n)]).abs() < 1e-11 * gen.sub[n].abs().max(1.0));
                assert!((gen.sup[n] - dense[(n, n + 1)]).abs() < 1e-11 * gen.sup[n].abs().max(1.0));
            }
            if n + 2 < 40 {
                assert_eq!(dense[(n + 2, n)], 0.0);
            }
        }
    }

    #[test]
    fn columns_sum_to_zero_and_stationary_is_annihilated() {
        let p = fig1(3.0, 100.0);
        let dim = correlation_dim(&p).unwrap();
        let gen = build_generator(&p, dim).unwrap();
        for m in 0..dim {
            let mut col = gen.diag[m];
            if m > 0 {
                col += gen.sup[m - 1];
            }
            if m + 1 < dim {
                col += gen.sub[m];
            }
            assert!(col.abs() < 1e-12 * gen.diag[m].max(1.0));
        }
        let lp = gen.apply(&gen.stationary);
        let scale = gen.diag.iter().copied().fold(0.0, f64::max);
        assert!(lp.iter().all(|v| v.abs() < 1e-10 * scale));
    }

    #[test]
    fn symmetrized_bands_equal_detailed_balance_form() {
        let points = [
            (1.0, 0.15, 0.0, 6.661, 100.0),
            (0.75, 0.15, 0.5, 2.3, 100.0),
            (0.25, 0.15, 0.5, 4.0, 100.0),
            (0.9, 0.0, 0.2, 7.5, 50.0),
            (0.6, 1.3, 0.0, 1.2, 30.0),
            (1.0, 0.05, 0.8, 11.0, 200.0),
            (0.5, 0.4, 0.1, 3.3, 80.0),
            (0.0, 0.2, 0.0, 2.0, 10.0),
            (0.95, 0.15, 0.3, 17.4, 120.0),
            (0.7, 2.0, 1.1, 9.9, 60.0),
        ];
        for (a, nb, delta, theta, flux) in points {
            let p = MaserParams::new(a, nb, delta, theta, flux).unwrap();
            let gen = build_generator(&p, 64).unwrap();
            let q = |n: usize| crate::model::q(n as f64 / flux, theta, delta).unwrap();
            for n in 0..gen.support - 1 {
                let m = (n + 1) as f64;
                let expected = -(((1.0 + nb) * m + flux * p.b() * q(n + 1)) * (nb * m + flux * a * q(n + 1))).sqrt();
                let got = gen.symmetrized.off[n];
                assert!((got - expected).abs() <= 1e-12 * expected.abs().max(1.0), "{a} {theta} n = {n}");
                // D^{-1/2} L D^{1/2} from the stationary ratios.
                let from_ratio = gen.sub[n] * (0.5 * (gen.log_stationary[n] - gen.log_stationary[n + 1])).exp();
                if gen.stationary[n + 1] > 0.0 {
                    assert!((from_ratio - got).abs() <= 1e-9 * got.abs().max(1e-300));
                }
            }
        }
    }

    #[test]
    fn damped_cavity_spectrum_is_the_integers() {
        let p = MaserParams::new(0.0, 0.15, 0.0, 0.0, 100.0).unwrap();
        let gen = build_generator(&p, 120).unwrap();
        for k in 0..5 {
            assert!((gen.symmetrized.eigenvalue(k) - k as f64).abs() < 1e-6, "k = {k}");
        }
        assert!((lambda_nz(&gen).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn gap_matches_dense_eigensolver() {
        let mut checked = 0;
        for a in [0.3, 0.75, 1.0] {
            for theta in [0.7, 2.5, 5.5] {
                for nb in [0.05, 0.15, 1.0] {
                    let p = MaserParams::new(a, nb, 0.2, theta, 20.0).unwrap();
                    let gen = build_generator(&p, 128).unwrap();
                    let sturm = lambda_nz(&gen).unwrap();
                    let dense = dense_gap(&gen);
                    assert!((sturm - dense).abs() < 1e-8 * dense, "{a} {theta} {nb}: {sturm} vs {dense}");
                    checked += 1;
                }
            }
        }
        assert_eq!(checked, 27);
    }

    #[test]
    fn spectrum_is_nonnegative_with_single_zero() {
        let p = MaserParams::new(0.8, 0.15, 0.3, 4.0, 30.0).unwrap();
        let gen = build_generator(&p, 96).unwrap();
        let ev = gen.symmetrized.eigenvalues();
        assert!(ev.iter().all(|v| *v >= -1e-10));
        assert_eq!(ev.iter().filter(|v| v.abs() < 1e-10).count(), 1);
    }

    #[test]
    fn truncation_is_stable() {
        for theta in [1.0, 3.0, 6.661, 12.0] {
            let p = fig1(theta, 100.0);
            let dim = correlation_dim(&p).unwrap();
            assert!(truncation_shift(&p, dim).unwrap() < 1e-8, "θ = {theta}");
        }
    }

    #[test]
    fn short_truncation_is_rejected() {
        let p = fig1(3.0, 100.0);
        assert!(matches!(build_generator(&p, 4), Err(Error::Truncation { .. })));
        let gen = build_generator(&p, 20).unwrap();
        assert!(matches!(lambda_nz(&gen), Err(Error::Truncation { .. })));
    }

    #[test]
    fn trapping_zero_decouples_the_ladder() {
        // q vanishes at n = 25 when θ√(25/100) = π.
        let p = MaserParams::new(1.0, 0.0, 0.0, 2.0 * std::f64::consts::PI, 100.0).unwrap();
        let gen = build_generator(&p, 64).unwrap();
        assert!(gen.block_decoupled());
        assert_eq!(gen.support, 25);
        assert!(gen.stationary[25..].iter().all(|&v| v == 0.0));
        assert!((lambda_nz(&gen).unwrap() - dense_gap(&gen)).abs() < 1e-8 * dense_gap(&gen));
    }

    #[test]
    fn exact_correlation_peaks_at_threshold() {
        let peak = exact_correlation(&fig1(1.0, 100.0)).unwrap();
        let below = exact_correlation(&fig1(0.8, 100.0)).unwrap();
        let above = exact_correlation(&fig1(1.3, 100.0)).unwrap();
        assert_eq!(peak.method, Method::Exact);
        assert!(peak.gamma_xi > below.gamma_xi && peak.gamma_xi > above.gamma_xi);
        assert!((peak.ln_gamma_xi - peak.gamma_xi.ln()).abs() < 1e-12);
    }

    #[test]
    fn underflowing_gap_uses_barrier_formula() {
        let theta = crate::phase::theta_maser_maser(1.0, 0.15, 0.0, 0).unwrap();
        let r = exact_correlation(&fig1(theta, 6000.0)).unwrap();
        assert!(r.asymptotic);
        assert_eq!(r.method, Method::Barrier);
        assert!(r.ln_gamma_xi > 280.0 * std::f64::consts::LN_10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn stationary_vector_is_in_the_kernel(
            a in 0.0f64..1.0, nb in 0.0f64..2.0, delta in 0.0f64..1.0, theta in 0.0f64..12.0, flux in 5.0f64..80.0,
        ) {
            let p = MaserParams::new(a, nb, delta, theta, flux).unwrap();
            let gen = build_generator(&p, 160).unwrap();
            let lp = gen.apply(&gen.stationary);
            let scale = gen.diag.iter().copied().fold(1.0, f64::max);
            prop_assert!(lp.iter().all(|v| v.abs() < 1e-10 * scale));
            let total: f64 = gen.stationary.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
