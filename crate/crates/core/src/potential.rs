//! The large-N effective potential `V₀(x) = −∫₀ˣ ln w`, its saddle points
//! in the `φ`-parametrization and the Gaussian saddle-point mixture.
//!
//! Saddle points satisfy `x + Δ² = (2a−1) sin²φ` and `θ = φ/(√(2a−1)|sin φ|)`.
//! Branch `k` covers `φ ∈ [φ₀ + kπ, (k+1)π − φ₀]`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{q_over_x, w, w_from_ratio, MaserParams};
use crate::numerics::{quad, roots, sinc};

const QUAD_REL: f64 = 1e-12;
const QUAD_ABS: f64 = 1e-14;
const PHI_TOL: f64 = 1e-13;

/// Sign of the curvature at a saddle point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SaddleKind {
    Minimum,
    Maximum,
}

/// One extremum of `V₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddlePoint {
    pub phi: f64,
    pub x: f64,
    pub theta: f64,
    pub branch: usize,
    pub kind: SaddleKind,
    /// `V₀` at the point; `None` when the branch integral is singular
    /// (zero temperature beyond the first branch).
    pub v0: Option<f64>,
    pub curvature: f64,
}

/// `√(2a−1)`, or an error when no maser branch exists.
fn inversion_sqrt(a: f64, delta: f64) -> Result<f64> {
    let inv = 2.0 * a - 1.0;
    if inv <= 0.0 || delta.abs() > inv.sqrt() {
        return Err(Error::NoMaserBranch { a, delta });
    }
    Ok(inv.sqrt())
}

/// Lower branch bound `φ₀ = arcsin(|Δ|/√(2a−1))`.
pub fn phi0(a: f64, delta: f64) -> Result<f64> {
    let s = inversion_sqrt(a, delta)?;
    Ok((delta.abs() / s).min(1.0).asin())
}

/// `x(φ) = (2a−1) sin²φ − Δ²`.
pub fn x_of_phi(phi: f64, a: f64, delta: f64) -> f64 {
    (2.0 * a - 1.0) * phi.sin().powi(2) - delta * delta
}

/// `θ(φ) = φ/(√(2a−1)|sin φ|)`, continuous at `φ = 0`.
pub fn theta_of_phi(phi: f64, a: f64) -> f64 {
    1.0 / ((2.0 * a - 1.0).sqrt() * sinc(phi).abs())
}

/// `1 − φ cot φ`, whose sign separates minima from maxima.
pub(crate) fn curvature_sign_factor(phi: f64) -> f64 {
    if phi.abs() < 1e-2 {
        let p2 = phi * phi;
        p2 * (1.0 / 3.0 + p2 * (1.0 / 45.0 + p2 * 2.0 / 945.0))
    } else {
        1.0 - phi / phi.tan()
    }
}

/// `V₀″` at the saddle labelled by `φ`: `(1 − φ cot φ)/(sin²φ (a + n_b(2a−1)))`.
pub fn curvature_of_phi(phi: f64, params: &MaserParams) -> f64 {
    let ratio = if phi.abs() < 1e-4 {
        1.0 / 3.0 + 2.0 * phi * phi / 15.0
    } else {
        curvature_sign_factor(phi) / phi.sin().powi(2)
    };
    ratio / params.potential_scale()
}

/// The `k`-th positive root of `tan φ = φ`, in `(kπ, kπ + π/2)`.
pub fn tan_fixed_point(k: usize) -> f64 {
    let lo = k as f64 * PI;
    roots::bisect(|p| p.sin() - p * p.cos(), lo + 1e-12, lo + 0.5 * PI, 1e-15)
        .expect("tan φ = φ has a root in every (kπ, kπ+π/2)")
}

/// The φ-interval of branch `k` and the split point between its maximum
/// and minimum sub-branches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub k: usize,
    pub lo: f64,
    pub hi: f64,
    /// Minimum of `θ(φ)` on the branch when it lies inside; the maximum
    /// sub-branch is `[lo, turn]` and the minimum sub-branch `[turn, hi]`.
    pub turn: Option<f64>,
}

impl Branch {
    pub fn new(a: f64, delta: f64, k: usize) -> Result<Self> {
        let p0 = phi0(a, delta)?;
        let base = k as f64 * PI;
        let turn = if k == 0 {
            None
        } else {
            let t = tan_fixed_point(k);
            (t > base + p0).then_some(t)
        };
        Ok(Self { k, lo: base + p0, hi: base + PI - p0, turn })
    }

    /// Start and end of the minimum sub-branch.
    pub fn minimum_range(&self) -> (f64, f64) {
        (self.turn.unwrap_or(self.lo), self.hi)
    }

    /// Start and end of the maximum sub-branch, if any.
    pub fn maximum_range(&self) -> Option<(f64, f64)> {
        self.turn.map(|t| (self.lo, t))
    }

    /// `θ` at which the branch starts to exist.
    pub fn theta_birth(&self, a: f64) -> f64 {
        theta_of_phi(self.turn.unwrap_or(self.lo), a)
    }

    /// `θ` at which the minimum sub-branch ends (infinite at zero detuning).
    pub fn theta_end(&self, a: f64) -> f64 {
        if (self.hi / PI).fract() == 0.0 {
            f64::INFINITY
        } else {
            theta_of_phi(self.hi, a)
        }
    }

    /// Solves `θ(φ) = θ` on one sub-branch, where `θ(φ)` is monotone.
    pub fn solve(&self, theta: f64, a: f64, kind: SaddleKind) -> Option<f64> {
        let (mut lo, mut hi) = match kind {
            SaddleKind::Minimum => self.minimum_range(),
            SaddleKind::Maximum => self.maximum_range()?,
        };
        // Endpoints at multiples of π carry θ = ∞.
        let open = |v: f64| v > 0.0 && (v / PI).fract() == 0.0;
        if open(lo) {
            lo += 1e-12 * lo;
        }
        if open(hi) {
            hi -= 1e-12 * hi;
        }
        roots::bisect(|p| theta_of_phi(p, a) - theta, lo, hi, PHI_TOL)
    }
}

/// Index of the branch containing `φ`.
pub fn branch_index(phi: f64, a: f64, delta: f64) -> Result<usize> {
    let p0 = phi0(a, delta)?;
    if !(phi >= 0.0) {
        return Err(Error::Domain(format!("phi = {phi} is negative")));
    }
    let k = (phi / PI).floor();
    let rel = phi - k * PI;
    let slack = 1e-12 * phi.max(1.0);
    if rel + slack < p0 || rel > PI - p0 + slack || (k > 0.0 && rel == 0.0) {
        return Err(Error::Domain(format!("phi = {phi} lies outside every branch interval")));
    }
    Ok(k as usize)
}

/// Saddle point described by `φ`; `params.theta` is ignored in favour of `θ(φ)`.
pub fn branch_point(phi: f64, params: &MaserParams) -> Result<SaddlePoint> {
    let k = branch_index(phi, params.a, params.delta)?;
    let curvature = curvature_of_phi(phi, params);
    let kind = if curvature_sign_factor(phi) > 0.0 { SaddleKind::Minimum } else { SaddleKind::Maximum };
    let v0 = match v0_on_branch(phi, params) {
        Ok(v) => Some(v),
        Err(Error::QuadratureSingularity(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(SaddlePoint {
        phi,
        x: x_of_phi(phi, params.a, params.delta).max(0.0),
        theta: theta_of_phi(phi, params.a),
        branch: k,
        kind,
        v0,
        curvature,
    })
}

fn integrate(f: impl Fn(f64) -> f64, breaks: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for pair in breaks.windows(2) {
        let r = quad::integrate(&f, pair[0], pair[1], QUAD_REL, QUAD_ABS);
        if !r.converged || !r.value.is_finite() {
            return Err(Error::QuadratureFailure { value: r.value, error: r.error });
        }
        total += r.value;
    }
    Ok(total)
}

/// `[lo, jπ..., hi]` with every multiple of π strictly inside.
fn breakpoints_at_pi_multiples(lo: f64, hi: f64) -> Vec<f64> {
    let mut pts = vec![lo];
    let mut j = (lo / PI).floor() + 1.0;
    while j * PI < hi {
        pts.push(j * PI);
        j += 1.0;
    }
    pts.push(hi);
    pts
}

/// `V₀(x) = −∫₀ˣ ln w(ν) dν`, normalized so that `V₀(0) = 0`.
pub fn v0_of_x(x: f64, params: &MaserParams) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("V0 needs x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let MaserParams { theta, delta, .. } = *params;
    let d2 = delta * delta;
    let lo = theta * delta.abs();
    let hi = theta * (x + d2).sqrt();
    // Sine zeros of q(ν) become breakpoints in ν.
    let mut breaks: Vec<f64> = breakpoints_at_pi_multiples(lo, hi)
        .into_iter()
        .map(|u| if theta > 0.0 { (u / theta).powi(2) - d2 } else { 0.0 })
        .collect();
    breaks[0] = 0.0;
    *breaks.last_mut().unwrap() = x;
    if params.nb == 0.0 {
        let zero_at_origin = q_over_x(0.0, theta, delta) == 0.0;
        if breaks.len() > 2 || zero_at_origin {
            return Err(Error::QuadratureSingularity(format!(
                "ln w(x) diverges at a trapping zero inside [0, {x}] with n_b = 0"
            )));
        }
    }
    let (a, nb) = (params.a, params.nb);
    let v = integrate(|nu| w_from_ratio(q_over_x(nu, theta, delta), a, nb).ln(), &breaks)?;
    Ok(-v)
}

/// Shared setup of the branch integrals in the variable `χ = θ√(x+Δ²)`.
struct BranchIntegral {
    theta: f64,
    lo: f64,
    a: f64,
    nb: f64,
}

impl BranchIntegral {
    fn new(phi: f64, params: &MaserParams) -> Result<Self> {
        let k = branch_index(phi, params.a, params.delta)?;
        let theta = theta_of_phi(phi, params.a);
        let lo = theta * params.delta.abs();
        if params.nb == 0.0 && (k > 0 || q_over_x(0.0, theta, params.delta) == 0.0) {
            return Err(Error::QuadratureSingularity(format!(
                "branch integral at phi = {phi} crosses a zero of sin with n_b = 0"
            )));
        }
        Ok(Self { theta, lo, a: params.a, nb: params.nb })
    }

    /// `(n_b + aθ² sinc²χ)(1 + n_b + bθ² sinc²χ)`.
    fn denominator(&self, chi: f64) -> f64 {
        let s2 = self.theta * self.theta * sinc(chi).powi(2);
        (self.nb + self.a * s2) * (1.0 + self.nb + (1.0 - self.a) * s2)
    }
}

/// `V₀` at the saddle labelled by `φ`, via the integrated-by-parts branch
/// integral; `params.theta` is ignored in favour of `θ(φ)`.
pub fn v0_on_branch(phi: f64, params: &MaserParams) -> Result<f64> {
    let bi = BranchIntegral::new(phi, params)?;
    if phi - bi.lo <= 8.0 * f64::EPSILON * phi {
        return Ok(0.0);
    }
    let d2 = params.delta * params.delta;
    let boundary =
        if d2 > 0.0 { d2 * w_from_ratio(q_over_x(0.0, bi.theta, params.delta), bi.a, bi.nb).ln() } else { 0.0 };
    let integral = integrate(
        |chi| {
            let s = sinc(chi);
            ((2.0 * chi).sin() - 2.0 * chi * s * s) / bi.denominator(chi)
        },
        &breakpoints_at_pi_multiples(bi.lo, phi),
    )?;
    Ok(boundary + params.potential_scale() * integral)
}

/// `dV₀/dθ` along a minimum sub-branch, `−(2/θ)(a + n_b(2a−1)) J(φ)`.
pub fn dv0_dtheta(phi: f64, params: &MaserParams) -> Result<f64> {
    let k = branch_index(phi, params.a, params.delta)?;
    if k > 0 && curvature_sign_factor(phi) <= 0.0 {
        return Err(Error::Domain(format!("phi = {phi} lies on a maximum sub-branch")));
    }
    let bi = BranchIntegral::new(phi, params)?;
    if phi - bi.lo <= 8.0 * f64::EPSILON * phi {
        return Ok(0.0);
    }
    let j = integrate(|chi| (2.0 * chi).sin() / bi.denominator(chi), &breakpoints_at_pi_multiples(bi.lo, phi))?;
    Ok(-2.0 / bi.theta * params.potential_scale() * j)
}

/// `V₀″` at a saddle `x`, `(2a−1)²/(a + n_b(2a−1)) · (q − x q′)/x²`.
pub fn v0_second(x: f64, params: &MaserParams) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("curvature formula needs x > 0, got {x}")));
    }
    let wx = w(x, params)?;
    if (wx - 1.0).abs() > 1e-10 {
        return Err(Error::Domain(format!("x = {x} is not a saddle point (w = {wx})")));
    }
    let MaserParams { theta, delta, .. } = *params;
    let r2 = x + delta * delta;
    let r = r2.sqrt();
    let (s, c) = (theta * r).sin_cos();
    let q = x / r2 * s * s;
    let dq = delta * delta * s * s / (r2 * r2) + x * theta * s * c / (r2 * r);
    let inv = params.inversion();
    Ok(inv * inv / params.potential_scale() * (q - x * dq) / (x * x))
}

/// All saddle points of `V₀` at `params`, ordered by `(branch, φ)`.
pub fn enumerate_saddles(params: &MaserParams) -> Vec<SaddlePoint> {
    let (a, delta, theta) = (params.a, params.delta, params.theta);
    let Ok(s) = inversion_sqrt(a, delta) else {
        return Vec::new();
    };
    let k_max = (theta * s / PI).floor() as usize + 1;
    let mut out = Vec::new();
    for k in 0..=k_max {
        let Ok(branch) = Branch::new(a, delta, k) else { continue };
        for kind in [SaddleKind::Maximum, SaddleKind::Minimum] {
            if let Some(phi) = branch.solve(theta, a, kind) {
                if let Ok(mut sp) = branch_point(phi, params) {
                    sp.kind = kind;
                    sp.theta = theta;
                    out.push(sp);
                }
            }
        }
    }
    out
}

/// One Gaussian component of the saddle-point approximation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureComponent {
    pub center: f64,
    /// Standard deviation in `x`, `1/√(N V₀″)`.
    pub width: f64,
    /// Probability mass carried by the component.
    pub weight: f64,
    /// Normalization `T_j` of the per-`n` density.
    pub amplitude: f64,
}

/// Gaussian approximation to `p̄(x)` built from the minima of `V₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    pub components: Vec<MixtureComponent>,
    pub params: MaserParams,
}

impl GaussianMixture {
    /// Approximate probability of photon number `n`.
    pub fn probability(&self, n: usize) -> f64 {
        let flux = self.params.flux;
        let x = n as f64 / flux;
        self.components
            .iter()
            .map(|c| {
                let z = (x - c.center) / c.width;
                c.amplitude / (2.0 * PI * flux).sqrt() * (-0.5 * z * z).exp()
            })
            .sum()
    }

    pub fn mean_x(&self) -> f64 {
        self.components.iter().map(|c| c.weight * c.center).sum()
    }
}

/// Saddle-point mixture at flux `flux` (overriding `params.flux`).
pub fn gaussian_mixture(params: &MaserParams, flux: f64) -> Result<GaussianMixture> {
    let params = params.with_flux(flux);
    let minima: Vec<(f64, f64, f64)> = enumerate_saddles(&params)
        .into_iter()
        .filter(|s| s.kind == SaddleKind::Minimum && s.curvature > 0.0)
        .filter_map(|s| s.v0.map(|v| (s.x, v, s.curvature)))
        .collect();
    if minima.is_empty() {
        return Err(Error::ThermalPhase);
    }
    // Mass of component j is ∝ e^{−N V_j}/√V″_j.
    let logs: Vec<f64> = minima.iter().map(|&(_, v, c)| -flux * v - 0.5 * c.ln()).collect();
    let norm = crate::numerics::logsumexp(&logs);
    let mut components: Vec<MixtureComponent> = minima
        .iter()
        .zip(&logs)
        .map(|(&(x, _, c), l)| {
            let weight = (l - norm).exp();
            MixtureComponent { center: x, width: 1.0 / (flux * c).sqrt(), weight, amplitude: weight * c.sqrt() }
        })
        .filter(|c| c.amplitude >= 1e-300)
        .collect();
    let total: f64 = components.iter().map(|c| c.weight).sum();
    for c in &mut components {
        c.weight /= total;
        c.amplitude /= total;
    }
    Ok(GaussianMixture { components, params })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::{stationary_distribution, DEFAULT_TAIL_TOL};
    use proptest::prelude::*;

    fn fig1(theta: f64) -> MaserParams {
        MaserParams::new(1.0, 0.15, 0.0, theta, 100.0).unwrap()
    }

    fn fig2(theta: f64) -> MaserParams {
        MaserParams::new(1.0, 0.15, 0.5, theta, 100.0).unwrap()
    }

    /// Trapezoid rule on a uniform grid, the oracle for `V₀(x)`.
    fn trapezoid(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
        let h = (hi - lo) / n as f64;
        let inner: f64 = (1..n).map(|i| f(lo + h * i as f64)).sum();
        h * (0.5 * (f(lo) + f(hi)) + inner)
    }

    /// Saddle on the branch-`k` minimum sub-branch by plain bisection of θ(φ).
    fn minimum_phi(theta: f64, a: f64, delta: f64, k: usize) -> f64 {
        Branch::new(a, delta, k).unwrap().solve(theta, a, SaddleKind::Minimum).unwrap()
    }

    #[test]
    fn phi0_examples() {
        assert_eq!(phi0(1.0, 0.0).unwrap(), 0.0);
        assert!((phi0(1.0, 0.5).unwrap() - PI / 6.0).abs() < 1e-15);
        assert!(matches!(phi0(0.6, 0.5), Err(Error::NoMaserBranch { .. })));
        assert!(phi0(0.5, 0.0).is_err());
    }

    #[test]
    fn branch_point_examples() {
        let sp = branch_point(1e-9, &fig1(0.0)).unwrap();
        assert!((sp.theta - 1.0).abs() < 1e-12);
        assert_eq!(sp.branch, 0);
        let p = fig2(0.0);
        let sp = branch_point(PI / 2.0, &p).unwrap();
        assert!((sp.x - 0.75).abs() < 1e-15);
        assert!((sp.curvature - 1.0 / 1.15).abs() < 1e-14);
        assert_eq!(sp.kind, SaddleKind::Minimum);
        let sp = branch_point(PI / 6.0, &p).unwrap();
        assert!((sp.theta - 1.047198).abs() < 1e-6);
        assert_eq!(sp.v0, Some(0.0));
        assert!(branch_point(0.2, &p).is_err());
        assert!(branch_point(PI, &fig1(0.0)).is_err());
    }

    #[test]
    fn v0_of_x_examples() {
        assert_eq!(v0_of_x(0.0, &fig1(2.0)).unwrap(), 0.0);
        let nb = 0.15;
        let eq = MaserParams::new(nb / (1.0 + 2.0 * nb), nb, 0.2, 4.0, 100.0).unwrap();
        for x in [0.1, 0.7, 1.9] {
            let v = v0_of_x(x, &eq).unwrap();
            assert!((v - x * ((1.0 + nb) / nb).ln()).abs() < 1e-12);
        }
        let p = fig1(2.0);
        let oracle = -trapezoid(|nu| w(nu, &p).unwrap().ln(), 0.0, 0.5, 20_000);
        assert!((v0_of_x(0.5, &p).unwrap() - oracle).abs() < 1e-8);
        let dark = MaserParams::new(1.0, 0.0, 0.0, 2.0 * PI, 100.0).unwrap();
        assert!(matches!(v0_of_x(0.5, &dark), Err(Error::QuadratureSingularity(_))));
        assert!(v0_of_x(0.2, &dark).is_ok());
    }

    #[test]
    fn branch_potential_vanishes_at_branch_start() {
        for k in 0..4 {
            let phi = PI / 6.0 + k as f64 * PI;
            assert_eq!(v0_on_branch(phi, &fig2(0.0)).unwrap(), 0.0);
        }
        assert_eq!(dv0_dtheta(PI / 6.0, &fig2(0.0)).unwrap(), 0.0);
    }

    #[test]
    fn branch_potential_matches_direct_integral() {
        let p = fig1(0.0);
        let phi = 2.0;
        let x = x_of_phi(phi, 1.0, 0.0);
        let direct = v0_of_x(x, &p.with_theta(theta_of_phi(phi, 1.0))).unwrap();
        assert!((v0_on_branch(phi, &p).unwrap() - direct).abs() < 1e-8);
        // Detuned branches, including k = 1.
        let p = fig2(0.0);
        for phi in [1.2, 2.4, 4.9, 5.3] {
            let x = x_of_phi(phi, 1.0, 0.5);
            let direct = v0_of_x(x, &p.with_theta(theta_of_phi(phi, 1.0))).unwrap();
            assert!((v0_on_branch(phi, &p).unwrap() - direct).abs() < 1e-8, "phi = {phi}");
        }
    }

    #[test]
    fn degenerate_minima_at_first_maser_transition() {
        // The four-digit value 6.661 leaves a residual of 2.6e-6; one more
        // digit brings both minima together.
        let theta = 6.661022;
        let v0 = v0_on_branch(minimum_phi(theta, 1.0, 0.0, 0), &fig1(0.0)).unwrap();
        let v1 = v0_on_branch(minimum_phi(theta, 1.0, 0.0, 1), &fig1(0.0)).unwrap();
        assert!((v0 - v1).abs() < 1e-6, "{v0} vs {v1}");
    }

    #[test]
    fn theta_derivative_matches_finite_difference() {
        let p = fig1(0.0);
        let phi = 4.8;
        let theta = theta_of_phi(phi, 1.0);
        let h = 1e-5;
        let v = |t: f64| v0_on_branch(minimum_phi(t, 1.0, 0.0, 1), &p).unwrap();
        let fd = (v(theta + h) - v(theta - h)) / (2.0 * h);
        let exact = dv0_dtheta(phi, &p).unwrap();
        assert!((fd / exact - 1.0).abs() < 1e-6, "{fd} vs {exact}");
        assert!(dv0_dtheta(3.5, &p).is_err(), "maximum sub-branch");
    }

    #[test]
    fn theta_derivative_changes_sign_once_per_sub_branch() {
        let p = fig1(0.0);
        let b = Branch::new(1.0, 0.0, 1).unwrap();
        let (lo, hi) = b.minimum_range();
        let signs: Vec<bool> =
            (1..200).map(|i| lo + (hi - lo) * i as f64 / 200.0).map(|phi| dv0_dtheta(phi, &p).unwrap() > 0.0).collect();
        let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
        assert_eq!(changes, 1);
    }

    #[test]
    fn curvature_formulas_agree() {
        for (i, delta) in [0.0, 0.5].into_iter().enumerate() {
            let p = MaserParams::new(1.0, 0.15, delta, 0.0, 100.0).unwrap();
            let p0 = phi0(1.0, delta).unwrap();
            for j in 0..10 {
                let k = j % 3;
                let frac = 0.05 + 0.9 * ((j * 7 + i * 3) % 10) as f64 / 10.0;
                let phi = k as f64 * PI + p0 + frac * (PI - 2.0 * p0);
                let x = x_of_phi(phi, 1.0, delta);
                let at = p.with_theta(theta_of_phi(phi, 1.0));
                let c1 = v0_second(x, &at).unwrap();
                let c2 = curvature_of_phi(phi, &p);
                assert!((c1 - c2).abs() < 1e-9 * c2.abs().max(1.0), "phi = {phi}: {c1} vs {c2}");
                // −d ln w/dx at the saddle.
                let h = 1e-6 * x.max(1e-3);
                let fd = -(w(x + h, &at).unwrap().ln() - w(x - h, &at).unwrap().ln()) / (2.0 * h);
                assert!((fd - c2).abs() < 1e-5 * c2.abs().max(1.0));
            }
        }
        assert!(v0_second(0.3, &fig1(2.0)).is_err(), "not a saddle");
    }

    #[test]
    fn curvature_vanishes_at_branch_birth() {
        for k in 1..4 {
            let c = curvature_of_phi(tan_fixed_point(k), &fig1(0.0));
            assert!(c.abs() < 1e-12);
        }
    }

    #[test]
    fn enumerate_examples() {
        assert!(enumerate_saddles(&fig1(0.5)).is_empty());
        let s = enumerate_saddles(&fig1(4.0));
        assert_eq!(s.len(), 1);
        assert_eq!((s[0].branch, s[0].kind), (0, SaddleKind::Minimum));
        let s = enumerate_saddles(&fig1(5.0));
        assert_eq!(s.len(), 3);
        assert_eq!(s.iter().filter(|p| p.branch == 1).count(), 2);
        let s = enumerate_saddles(&fig2(1.2));
        assert_eq!(s.len(), 1);
        let oracle = roots::bisect(|p| theta_of_phi(p, 1.0) - 1.2, PI / 6.0, PI / 2.0, 1e-15).unwrap();
        assert!((s[0].phi - oracle).abs() < 1e-12);
        assert!(enumerate_saddles(&MaserParams::new(0.4, 0.15, 0.0, 10.0, 100.0).unwrap()).is_empty());
    }

    #[test]
    fn single_minimum_mixture() {
        let m = gaussian_mixture(&fig1(4.0), 1000.0).unwrap();
        assert_eq!(m.components.len(), 1);
        assert!((m.components[0].weight - 1.0).abs() < 1e-12);
        let c = curvature_of_phi(enumerate_saddles(&fig1(4.0))[0].phi, &fig1(4.0));
        assert!((m.components[0].amplitude - c.sqrt()).abs() < 1e-12);
        assert!(matches!(gaussian_mixture(&fig1(0.5), 1000.0), Err(Error::ThermalPhase)));
    }

    #[test]
    fn mixture_at_coexistence_is_bimodal() {
        let m = gaussian_mixture(&fig1(6.661), 1000.0).unwrap();
        assert_eq!(m.components.len(), 2);
        let (w0, w1) = (m.components[0].weight, m.components[1].weight);
        assert!(w0 / w1 < 3.0 && w1 / w0 < 3.0, "{w0} {w1}");
    }

    #[test]
    fn mixture_tracks_exact_distribution() {
        let p = fig1(5.0).with_flux(1000.0);
        let m = gaussian_mixture(&p, 1000.0).unwrap();
        let exact = stationary_distribution(&p, DEFAULT_TAIL_TOL).unwrap();
        assert!((m.mean_x() / exact.mean_x() - 1.0).abs() < 0.01);
        for theta in [3.0, 5.0, 9.0, 14.5] {
            let p = fig1(theta).with_flux(1000.0);
            let m = gaussian_mixture(&p, 1000.0).unwrap();
            let exact = stationary_distribution(&p, DEFAULT_TAIL_TOL).unwrap();
            let tv: f64 =
                exact.probs().iter().enumerate().map(|(n, pe)| (pe - m.probability(n)).abs()).sum::<f64>() * 0.5;
            assert!(tv < 0.05, "theta = {theta}: tv = {tv}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn saddles_satisfy_the_transcendental_equation(theta in 0.5f64..30.0, a in 0.55f64..1.0, delta in 0.0f64..0.3) {
            let p = MaserParams::new(a, 0.15, delta, theta, 100.0).unwrap();
            let saddles = enumerate_saddles(&p);
            let inv = 2.0 * a - 1.0;
            for s in &saddles {
                let r2 = s.x + delta * delta;
                let residual = inv * (theta * r2.sqrt()).sin().powi(2) - r2;
                prop_assert!(residual.abs() < 1e-10);
                prop_assert!(r2 <= inv + 1e-12);
                let is_min = curvature_sign_factor(s.phi) > 0.0;
                prop_assert_eq!(is_min, s.kind == SaddleKind::Minimum);
            }
            // Along each branch k ≥ 1, a maximum precedes the minimum.
            for k in 1..=saddles.iter().map(|s| s.branch).max().unwrap_or(0) {
                let kinds: Vec<_> = saddles.iter().filter(|s| s.branch == k).map(|s| s.kind).collect();
                if kinds.len() == 2 {
                    prop_assert_eq!(kinds, vec![SaddleKind::Maximum, SaddleKind::Minimum]);
                }
            }
        }

        #[test]
        fn derivative_matches_finite_difference(k in 0usize..3, frac in 0.1f64..0.9, delta in prop::sample::select(vec![0.0, 0.5])) {
            let p = MaserParams::new(1.0, 0.15, delta, 0.0, 100.0).unwrap();
            let b = Branch::new(1.0, delta, k).unwrap();
            let (lo, hi) = b.minimum_range();
            let phi = lo + frac * (hi - lo);
            let theta = theta_of_phi(phi, 1.0);
            let h = 1e-5;
            let v = |t: f64| v0_on_branch(b.solve(t, 1.0, SaddleKind::Minimum).unwrap(), &p).unwrap();
            let fd = (v(theta + h) - v(theta - h)) / (2.0 * h);
            let exact = dv0_dtheta(phi, &p).unwrap();
            prop_assert!((fd - exact).abs() < 1e-5 * exact.abs().max(1e-3), "{} vs {}", fd, exact);
        }
    }
}
