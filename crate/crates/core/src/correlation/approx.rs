//! Approximate correlation lengths: eigenvalue Ansatz, small-`x` master
//! equation, mean field, barrier penetration and the cumulative sum rule.

use std::f64::consts::PI;

use super::{CorrelationResult, Method};
use crate::distribution::{down_rate, stationary_distribution, up_rate, DEFAULT_TAIL_TOL};
use crate::error::{Error, Result};
use crate::model::{q, theta_eff_sq, MaserParams};
use crate::numerics::{logsumexp, roots, sinc};
use crate::phase::theta0_star;
use crate::potential::{curvature_sign_factor, enumerate_saddles, SaddleKind};

impl CorrelationResult {
    fn from_xi(gamma_xi: f64, method: Method) -> Self {
        Self { lambda_nz: 1.0 / gamma_xi, gamma_xi, ln_gamma_xi: gamma_xi.ln(), method, asymptotic: false }
    }
}

/// Large-`N` thermal-phase value `1/(1 − (2a−1)θ_eff²)` shared by all schemes.
pub fn xi_thermal_limit(params: &MaserParams) -> Result<f64> {
    let denom = 1.0 - params.inversion() * params.theta_eff_sq();
    if denom <= 0.0 {
        return Err(Error::Divergent(1.0 - denom));
    }
    Ok(1.0 / denom)
}

/// Ansatz estimate `σ_n²/((n_b+1)⟨n⟩ + N b⟨q_n⟩)` from distribution moments.
pub fn ansatz_from_moments(mean: f64, variance: f64, mean_q: f64, params: &MaserParams) -> Result<f64> {
    let denom = (params.nb + 1.0) * mean + params.flux * params.b() * mean_q;
    if !(denom > 0.0) {
        return Err(Error::Domain("ansatz denominator vanishes for the vacuum state".into()));
    }
    Ok(variance / denom)
}

/// `γξ_E` from the exact stationary moments.
pub fn xi_ansatz_e(params: &MaserParams) -> Result<CorrelationResult> {
    let dist = stationary_distribution(params, DEFAULT_TAIL_TOL)?;
    let m = dist.moments();
    let xi = ansatz_from_moments(m.mean, m.variance, m.mean_q, params)?;
    Ok(CorrelationResult::from_xi(xi, Method::AnsatzE))
}

/// Small-`x` master-equation estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MasterEstimate {
    pub gamma_xi: f64,
    /// Linear drift coefficient `1 − (2a−1)θ_eff²`.
    pub alpha: f64,
    /// Quadratic drift coefficient.
    pub beta: f64,
    /// Diffusion coefficient `n_b + aθ_eff²`.
    pub diffusion: f64,
    /// Node of the slowest mode.
    pub x0: f64,
    /// Whether `θ√(x₀+Δ²) < 1`, the expansion's range of validity.
    pub valid: bool,
}

/// `(2a−1) θ⁴ sin u (sin u − u cos u)/u⁴` with `u = θ|Δ|`.
fn quadratic_drift(a: f64, delta: f64, theta: f64) -> f64 {
    let d = delta.abs();
    let u = theta * d;
    if u < 1e-3 {
        return (2.0 * a - 1.0) * theta.powi(4) * (1.0 / 3.0 - 4.0 * u * u / 45.0);
    }
    (2.0 * a - 1.0) * (u.sin().powi(2) / d.powi(4) - theta * u.sin() * u.cos() / d.powi(3))
}

/// `γξ_M = 1/√(α² + 4βγ_c/N)`; `flux` may be infinite.
pub fn master_estimate(a: f64, nb: f64, delta: f64, theta: f64, flux: f64) -> Result<MasterEstimate> {
    let te2 = theta_eff_sq(theta, delta);
    let alpha = 1.0 - (2.0 * a - 1.0) * te2;
    let beta = quadratic_drift(a, delta, theta);
    let diffusion = nb + a * te2;
    let radicand = alpha * alpha + 4.0 * beta * diffusion / flux;
    if !(radicand > 0.0) {
        return Err(Error::Domain(format!("master-equation radicand {radicand:e} is not positive")));
    }
    let root = radicand.sqrt();
    let x0 = if alpha > 0.0 { 2.0 * diffusion / flux / (alpha + root) } else { (root - alpha) / (2.0 * beta) };
    let valid = theta * (x0 + delta * delta).sqrt() < 1.0;
    Ok(MasterEstimate { gamma_xi: 1.0 / root, alpha, beta, diffusion, x0, valid })
}

pub fn xi_master_m(params: &MaserParams) -> Result<CorrelationResult> {
    let MaserParams { a, nb, delta, theta, flux } = *params;
    let est = master_estimate(a, nb, delta, theta, flux)?;
    Ok(CorrelationResult::from_xi(est.gamma_xi, Method::MasterM))
}

/// `χ(u) = √(sin²u/(1 − u cot u))`, with `χ(0) = √3`.
pub fn chi(u: f64) -> f64 {
    if u == 0.0 {
        return 3f64.sqrt();
    }
    if u.abs() < 1e-4 {
        return 3f64.sqrt() * (1.0 - u * u / 5.0);
    }
    (u.sin().powi(2) / curvature_sign_factor(u)).sqrt()
}

/// Master-equation value at the threshold `θ₀*`:
/// `(2a−1)/2 · √(N/(a + n_b(2a−1))) · χ(θ₀*|Δ|)`.
pub fn master_peak(a: f64, nb: f64, delta: f64, flux: f64) -> Result<f64> {
    if a < 0.5 + 0.5 * delta * delta || a > 1.0 {
        return Err(Error::Domain(format!("threshold peak needs 1/2 + Δ²/2 <= a <= 1, got a = {a}")));
    }
    let inv = 2.0 * a - 1.0;
    let u = if delta == 0.0 { 0.0 } else { theta0_star(a, delta)? * delta.abs() };
    Ok(0.5 * inv * (flux / (a + nb * inv)).sqrt() * chi(u))
}

/// One point of the parametric mean-field curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanFieldPoint {
    pub phi: f64,
    pub theta: f64,
    pub x0: f64,
    pub gamma_xi: f64,
}

/// `dq/dx` at `x` for pump `θ` and detuning `Δ`.
pub fn q_derivative(x: f64, theta: f64, delta: f64) -> f64 {
    let r2 = x + delta * delta;
    if r2 == 0.0 {
        return theta * theta;
    }
    let u = theta * r2.sqrt();
    let s = sinc(u);
    theta * theta * (delta * delta * s * s + x * s * u.cos()) / r2
}

fn mean_field_weight(a: f64) -> Result<f64> {
    if a <= 0.5 {
        return Err(Error::Domain(format!("mean field needs a > 1/2 (a = {a}); use the ansatz estimate instead")));
    }
    Ok(a / (2.0 * a - 1.0))
}

/// Mean-field solution and correlation length at parameter `φ`.
pub fn mean_field_point(phi: f64, params: &MaserParams) -> Result<MeanFieldPoint> {
    let MaserParams { a, nb, delta, flux, .. } = *params;
    let f = mean_field_weight(a)?;
    let inv = 2.0 * a - 1.0;
    let d2 = delta * delta;
    let s2 = phi.sin().powi(2);
    let h = (f - nb) / flux + d2 - inv * s2;
    let g = nb * f / (flux * flux) + d2 * nb / flux + f / flux * inv * s2;
    let disc = (h * h + 4.0 * g).sqrt();
    let x0 = if h > 0.0 { 2.0 * g / (h + disc) } else { 0.5 * (disc - h) };
    let shifted = x0 + f / flux;
    let r2 = shifted + d2;
    let theta = phi / r2.sqrt();
    let slope = (d2 * s2 + shifted * phi * phi.sin() * phi.cos()) / (r2 * r2);
    Ok(MeanFieldPoint { phi, theta, x0, gamma_xi: 1.0 / (1.0 - inv * slope) })
}

pub fn mean_field_curve(params: &MaserParams, phis: &[f64]) -> Result<Vec<MeanFieldPoint>> {
    phis.iter().map(|&phi| mean_field_point(phi, params)).collect()
}

/// Mean-field point on the lowest-`φ` solution of `θ(φ) = params.theta`.
pub fn xi_mean_field_point(params: &MaserParams) -> Result<MeanFieldPoint> {
    let f = mean_field_weight(params.a)?;
    let theta = params.theta;
    if theta == 0.0 {
        return mean_field_point(0.0, params);
    }
    let reach = params.inversion() + (params.nb + f) / params.flux + params.delta * params.delta;
    let phi_max = theta * reach.sqrt() * (1.0 + 1e-9) + 1e-12;
    let gap = |phi: f64| mean_field_point(phi, params).map_or(f64::NAN, |p| p.theta - theta);
    let samples = 4096;
    let mut lo = 0.0;
    let mut g_lo = gap(lo);
    for i in 1..=samples {
        let hi = phi_max * i as f64 / samples as f64;
        let g_hi = gap(hi);
        if g_lo < 0.0 && g_hi >= 0.0 {
            let phi = roots::bisect(gap, lo, hi, 1e-15 * phi_max.max(1.0)).unwrap_or(hi);
            return mean_field_point(phi, params);
        }
        lo = hi;
        g_lo = g_hi;
    }
    Err(Error::NoCrossing(format!("mean-field curve does not reach θ = {theta}")))
}

pub fn xi_mean_field(params: &MaserParams) -> Result<CorrelationResult> {
    let p = xi_mean_field_point(params)?;
    Ok(CorrelationResult::from_xi(p.gamma_xi, Method::MeanField))
}

/// Location and height of the first mean-field peak at zero detuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanFieldPeak {
    /// `φ₀* = (3(n_b+f)/(N(2a−1)))^{1/4}`.
    pub phi: f64,
    pub theta: f64,
    /// `(2a−1)/2 · √(3N/(a + n_b(2a−1)))`.
    pub gamma_xi: f64,
}

pub fn mean_field_peak(params: &MaserParams) -> Result<MeanFieldPeak> {
    let f = mean_field_weight(params.a)?;
    let inv = params.inversion();
    let phi = (3.0 * (params.nb + f) / (params.flux * inv)).powf(0.25);
    let theta = mean_field_point(phi, &params.with_delta(0.0))?.theta;
    let gamma_xi = 0.5 * inv * (3.0 * params.flux / params.potential_scale()).sqrt();
    Ok(MeanFieldPeak { phi, theta, gamma_xi })
}

/// Barrier-penetration estimate between the two lowest minima of `V₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierEstimate {
    pub gamma_xi: f64,
    pub ln_gamma_xi: f64,
    /// Smaller of the two barrier heights.
    pub barrier: f64,
    pub lower: f64,
    pub top: f64,
    pub upper: f64,
    /// Ratio of the larger to the smaller escape term.
    pub term_ratio: f64,
}

pub fn barrier_estimate(params: &MaserParams) -> Result<BarrierEstimate> {
    let saddles = enumerate_saddles(params);
    let mut minima: Vec<_> =
        saddles.iter().filter(|s| s.kind == SaddleKind::Minimum && s.curvature > 0.0 && s.v0.is_some()).collect();
    if minima.len() < 2 {
        return Err(Error::NoBarrier(minima.len()));
    }
    minima.sort_by(|l, r| l.v0.unwrap().total_cmp(&r.v0.unwrap()));
    let (mut lo, mut hi) = (minima[0], minima[1]);
    if lo.x > hi.x {
        std::mem::swap(&mut lo, &mut hi);
    }
    let top = saddles
        .iter()
        .filter(|s| s.kind == SaddleKind::Maximum && s.curvature < 0.0 && s.x > lo.x && s.x < hi.x)
        .filter(|s| s.v0.is_some())
        .max_by(|l, r| l.v0.unwrap().total_cmp(&r.v0.unwrap()))
        .ok_or(Error::NoBarrier(2))?;
    let (v_lo, v_top, v_hi) = (lo.v0.unwrap(), top.v0.unwrap(), hi.v0.unwrap());
    let flux = params.flux;
    let escape = [0.5 * lo.curvature.ln() - flux * (v_top - v_lo), 0.5 * hi.curvature.ln() - flux * (v_top - v_hi)];
    let rate_at_top = top.x * (1.0 + params.nb) + params.b() * q(top.x, params.theta, params.delta)?;
    let ln_gamma_xi = (2.0 * PI).ln() - rate_at_top.ln() - 0.5 * (-top.curvature).ln() - logsumexp(&escape);
    Ok(BarrierEstimate {
        gamma_xi: ln_gamma_xi.exp(),
        ln_gamma_xi,
        barrier: (v_top - v_lo).min(v_top - v_hi),
        lower: lo.x,
        top: top.x,
        upper: hi.x,
        term_ratio: (escape[0] - escape[1]).abs().exp(),
    })
}

pub fn xi_barrier(params: &MaserParams) -> Result<CorrelationResult> {
    let b = barrier_estimate(params)?;
    Ok(CorrelationResult {
        lambda_nz: (-b.ln_gamma_xi).exp(),
        gamma_xi: b.gamma_xi,
        ln_gamma_xi: b.ln_gamma_xi,
        method: Method::Barrier,
        asymptotic: false,
    })
}

const SUM_RULE_MAX_TERMS: usize = 1 << 24;
const SUM_RULE_TERMS_PER_FLUX: f64 = 16384.0;

/// Sum-rule estimate
/// `1 + Σ_{n≥1} [P_n(1−P_n)/(B_n p̄_n) − (1 − (n_b/(1+n_b))ⁿ)/n]`.
///
/// `(1−P_n)/p̄_n` comes from the backward recursion `R_n = 1 + R_{n+1} p̄_{n+1}/p̄_n`,
/// which stays finite where `p̄_n` underflows. Above a trapping zero the
/// ratio takes its limiting value, so those terms do not drop out. The series tail decays like
/// `N/n²`; it is summed out to `16384 N` terms.
pub fn xi_sumrule(params: &MaserParams) -> Result<CorrelationResult> {
    let dist = stationary_distribution(params, DEFAULT_TAIL_TOL)?;
    let cumulative = &dist.moments().cumulative;
    let len = dist.len();
    let n_end = ((params.flux * SUM_RULE_TERMS_PER_FLUX).ceil() as usize).max(4 * len).min(SUM_RULE_MAX_TERMS);
    let ratio = |n: usize| up_rate(n, params) / down_rate(n + 1, params);
    let r_end = ratio(n_end);
    if r_end >= 1.0 {
        return Err(Error::Divergent(r_end));
    }
    let rho = params.nb / (1.0 + params.nb);
    let mut tail = 1.0 / (1.0 - r_end);
    let mut sum = 0.0;
    for n in (1..=n_end).rev() {
        if n < n_end {
            tail = 1.0 + ratio(n) * tail;
        }
        let p_n = cumulative.get(n).copied().unwrap_or(1.0);
        sum += p_n * tail / down_rate(n, params) - (1.0 - rho.powf(n as f64)) / n as f64;
    }
    Ok(CorrelationResult::from_xi(1.0 + sum, Method::SumRule))
}
