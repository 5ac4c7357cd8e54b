//! Critical lines, triple points, phase classification and the order parameter.

use std::f64::consts::PI;

use crate::distribution::{stationary_distribution, DEFAULT_TAIL_TOL};
use crate::error::{Error, Result};
use crate::model::{theta_eff_sq, MaserParams};
use crate::numerics::roots;
use crate::potential::{
    enumerate_saddles, phi0, tan_fixed_point, theta_of_phi, v0_on_branch, x_of_phi, Branch, SaddleKind, SaddlePoint,
};

const THETA_TOL: f64 = 1e-12;
const PHI_TOL: f64 = 1e-13;
/// Samples used to bracket sign changes along a branch.
const SCAN_SAMPLES: usize = 256;
/// Slack when comparing potential values of competing minima.
const GLOBAL_SLACK: f64 = 1e-9;

/// Pump parameter of the second-order thermal-to-maser transition.
pub fn theta0_star(a: f64, delta: f64) -> Result<f64> {
    let inv = 2.0 * a - 1.0;
    if inv <= delta * delta {
        return Err(Error::NoTransition(format!("a = {a} <= 1/2 + delta^2/2 for delta = {delta}")));
    }
    let s = inv.sqrt();
    let d = delta.abs();
    if d < 1e-6 {
        let u = d / s;
        return Ok((1.0 + u * u / 6.0) / s);
    }
    Ok((d / s).asin() / d)
}

/// Pump parameter at which branch `k ≥ 1` is born.
pub fn theta_k(a: f64, k: usize) -> Result<f64> {
    if a <= 0.5 {
        return Err(Error::NoMaserBranch { a, delta: 0.0 });
    }
    if k == 0 {
        return Err(Error::Domain("branch births are defined for k >= 1".into()));
    }
    Ok(theta_of_phi(tan_fixed_point(k), a))
}

/// Closed-form second-order maser-to-thermal line `θ*_{kt}`; infinite at zero detuning.
pub fn theta_maser_thermal(a: f64, delta: f64, k: usize) -> Result<f64> {
    if 2.0 * a - 1.0 <= delta * delta {
        return Err(Error::NoTransition(format!("a = {a} <= 1/2 + delta^2/2 for delta = {delta}")));
    }
    if delta == 0.0 {
        return Ok(f64::INFINITY);
    }
    let p0 = phi0(a, delta)?;
    Ok(((k + 1) as f64 * PI - p0) / delta.abs())
}

fn point(a: f64, nb: f64, delta: f64, theta: f64) -> MaserParams {
    MaserParams { a, nb, delta, theta, flux: 1.0 }
}

/// `V₀` at the branch-`k` minimum for pump parameter `theta`.
fn minimum_potential(branch: &Branch, params: &MaserParams, theta: f64) -> Option<(f64, f64)> {
    let phi = branch.solve(theta, params.a, SaddleKind::Minimum)?;
    v0_on_branch(phi, params).ok().map(|v| (phi, v))
}

/// True when no minimum outside `skip` lies below `value` at `params`.
fn no_lower_minimum(params: &MaserParams, value: f64, skip: &[usize]) -> bool {
    enumerate_saddles(params)
        .iter()
        .filter(|s| s.kind == SaddleKind::Minimum && !skip.contains(&s.branch))
        .all(|s| s.v0.map_or(true, |v| v >= value - GLOBAL_SLACK))
}

/// Whether the empty cavity `x = 0` is a local minimum of `V₀`.
fn thermal_is_local_minimum(params: &MaserParams) -> bool {
    params.inversion() * params.theta_eff_sq() < 1.0
}

/// First-order maser-maser line `θ*_{k,k+1}` where the minima of branches
/// `k` and `k+1` are degenerate global minima.
pub fn theta_maser_maser(a: f64, nb: f64, delta: f64, k: usize) -> Result<f64> {
    let lower = Branch::new(a, delta, k)?;
    let upper = Branch::new(a, delta, k + 1)?;
    let params = point(a, nb, delta, 0.0);
    let theta_lo = lower.theta_birth(a).max(upper.theta_birth(a));
    let theta_hi = lower.theta_end(a).min(upper.theta_end(a));
    if theta_lo >= theta_hi {
        return Err(Error::NoCrossing(format!("branches {k} and {} do not overlap", k + 1)));
    }
    let gap = |theta: f64| -> f64 {
        match (minimum_potential(&lower, &params, theta), minimum_potential(&upper, &params, theta)) {
            (Some((_, v0)), Some((_, v1))) => v0 - v1,
            _ => f64::NAN,
        }
    };
    // At zero detuning the overlap is unbounded: scan geometrically growing windows.
    let period = PI / (2.0 * a - 1.0).sqrt();
    let guard = 1e-9 * theta_lo.max(1.0);
    let mut lo = theta_lo + guard;
    let mut width = if theta_hi.is_finite() { theta_hi - theta_lo } else { period };
    for _ in 0..if theta_hi.is_finite() { 1 } else { 16 } {
        let hi = (lo + width).min(theta_hi - guard);
        let n = if theta_hi.is_finite() { SCAN_SAMPLES } else { 64 };
        for (b_lo, b_hi) in roots::sign_change_brackets(gap, lo, hi, n) {
            if !(gap(b_lo) < 0.0) {
                continue;
            }
            let Some(theta) = roots::bisect(gap, b_lo, b_hi, THETA_TOL) else { continue };
            let Some((_, v)) = minimum_potential(&lower, &params, theta) else { continue };
            let at = params.with_theta(theta);
            if thermal_is_local_minimum(&at) && v >= 0.0 {
                continue;
            }
            if no_lower_minimum(&at, v, &[k, k + 1]) {
                return Ok(theta);
            }
        }
        lo = hi;
        width *= 1.5;
    }
    Err(Error::NoCrossing(format!("minima of branches {k} and {} never exchange as global minima", k + 1)))
}

/// Last sign change of `V₀` from positive to negative along the minimum
/// sub-branch of branch `k`, without any global-minimum check.
pub(crate) fn thermal_crossing(a: f64, nb: f64, delta: f64, k: usize) -> Option<(f64, f64)> {
    let branch = Branch::new(a, delta, k).ok()?;
    let params = point(a, nb, delta, 0.0);
    let (lo, hi) = branch.minimum_range();
    let hi = hi - 1e-12 * hi;
    let v = |phi: f64| v0_on_branch(phi, &params).unwrap_or(f64::NAN);
    let step = (hi - lo) / SCAN_SAMPLES as f64;
    let mut last = None;
    let mut prev = v(lo);
    for i in 1..SCAN_SAMPLES {
        let phi = lo + step * i as f64;
        let cur = v(phi);
        if prev > 0.0 && cur < 0.0 {
            last = Some((phi - step, phi));
        }
        prev = cur;
    }
    let (b_lo, b_hi) = last?;
    let phi = roots::bisect(v, b_lo, b_hi, PHI_TOL)?;
    Some((phi, theta_of_phi(phi, a)))
}

/// First-order thermal-to-maser line `θ*_{tk}`: the minimum of branch `k`
/// drops below the thermal value `V₀ = 0` while being the global minimum.
pub fn theta_thermal_maser(a: f64, nb: f64, delta: f64, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain("thermal-maser lines are defined for k >= 1".into()));
    }
    let (_, theta) = thermal_crossing(a, nb, delta, k)
        .ok_or_else(|| Error::NoTransition(format!("V0 on branch {k} never crosses zero")))?;
    let at = point(a, nb, delta, theta);
    if !thermal_is_local_minimum(&at) {
        return Err(Error::NoTransition(format!("the thermal state is unstable at theta = {theta}")));
    }
    if !no_lower_minimum(&at, 0.0, &[k]) {
        return Err(Error::NoTransition(format!("another branch is the global minimum at theta = {theta}")));
    }
    Ok(theta)
}

/// Difference `θ_{t,k+1} − θ_{kt}` that vanishes at a triple point.
fn lobe_gap(a: f64, nb: f64, delta: f64, k: usize) -> f64 {
    let Some((_, theta_t)) = thermal_crossing(a, nb, delta, k + 1) else { return f64::NAN };
    match theta_maser_thermal(a, delta, k) {
        Ok(theta_kt) => theta_t - theta_kt,
        Err(_) => f64::NAN,
    }
}

/// Detuning `|Δ_{k,k+1}|` at `a = 1` where lobes `k` and `k+1` separate.
pub fn critical_detuning(nb: f64, k: usize) -> Result<f64> {
    let gap = |d: f64| lobe_gap(1.0, nb, d, k);
    let brackets = roots::sign_change_brackets(gap, 0.02, 0.98, 48);
    for (lo, hi) in brackets {
        if !(gap(lo) < 0.0) {
            continue;
        }
        let Some(d) = roots::bisect(gap, lo, hi, 1e-11) else { continue };
        // Islands of V₀ < 0 make the gap jump; keep only continuous zeros.
        if gap(d).abs() < 1e-6 {
            return Ok(d);
        }
    }
    Err(Error::NoCrossing(format!("no separation of lobes {k} and {} for |delta| < 1", k + 1)))
}

/// A point where the thermal phase and maser branches `k`, `k+1` coexist.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriplePoint {
    pub k: usize,
    pub a: f64,
    pub theta: f64,
}

/// Triple points for branch pairs `(k, k+1)` with `k ≤ k_max`.
pub fn triple_points_up_to(nb: f64, delta: f64, k_max: usize) -> Result<Vec<TriplePoint>> {
    if delta == 0.0 {
        return Err(Error::Precondition("triple points need a nonzero detuning".into()));
    }
    let a_min = 0.5 + delta * delta / 2.0;
    if a_min >= 1.0 {
        return Ok(Vec::new());
    }
    let steps = ((1.0 - a_min) / 1e-3).floor() as usize;
    let grid: Vec<f64> = (0..=steps).rev().map(|i| 1.0 - i as f64 * 1e-3).filter(|&a| a > a_min).collect();
    let mut out = Vec::new();
    for k in 0..=k_max {
        let gap = |a: f64| lobe_gap(a, nb, delta, k);
        let values: Vec<f64> = grid.iter().map(|&a| gap(a)).collect();
        for i in 1..values.len() {
            let (g0, g1) = (values[i - 1], values[i]);
            if !(g0.is_finite() && g1.is_finite()) || g0.signum() == g1.signum() {
                continue;
            }
            let Some(a) = roots::bisect(gap, grid[i - 1], grid[i], 1e-10) else { continue };
            let Ok(theta) = theta_maser_thermal(a, delta, k) else { continue };
            if gap(a).abs() > 1e-6 * theta {
                continue;
            }
            if no_lower_minimum(&point(a, nb, delta, theta), 0.0, &[k, k + 1]) {
                out.push(TriplePoint { k, a, theta });
            }
        }
    }
    Ok(out)
}

/// Triple points for the branch pairs up to `(3, 4)`.
pub fn triple_points(nb: f64, delta: f64) -> Result<Vec<TriplePoint>> {
    triple_points_up_to(nb, delta, 3)
}

/// A competitor for the global minimum of `V₀`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Competitor {
    Thermal,
    Maser(usize),
}

/// Phase of a parameter point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Thermal,
    Maser(usize),
    /// Two minima within `10/N` of each other, the lower one first.
    Coexistence(Competitor, Competitor),
}

/// Classification of a parameter point with its order parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub params: MaserParams,
    pub phase: Phase,
    /// `⟨x⟩` at the global minimum; finite-N thermal value in the thermal phase.
    pub order_parameter: f64,
    /// `d⟨x⟩/dθ` on a maser branch, where finite.
    pub slope: Option<f64>,
    /// Minimum-kind saddles with known potential values.
    pub minima: Vec<SaddlePoint>,
}

/// Finite-N thermal order parameter `(n_b + aθ_eff²)/(N(1 + (1−2a)θ_eff²))`.
pub fn thermal_order_parameter(params: &MaserParams) -> f64 {
    let te2 = params.theta_eff_sq();
    let denom = 1.0 - params.inversion() * te2;
    if denom <= 0.0 {
        return f64::INFINITY;
    }
    (params.nb + params.a * te2) / (params.flux * denom)
}

/// Classifies `params` by the global minimum of `V₀`.
pub fn classify(params: &MaserParams) -> PhasePoint {
    let minima: Vec<SaddlePoint> =
        enumerate_saddles(params).into_iter().filter(|s| s.kind == SaddleKind::Minimum && s.v0.is_some()).collect();
    let mut candidates: Vec<(Competitor, f64, f64, Option<f64>)> =
        minima.iter().map(|s| (Competitor::Maser(s.branch), s.v0.unwrap_or(f64::INFINITY), s.x, Some(s.phi))).collect();
    let thermal_x = thermal_order_parameter(params);
    if thermal_is_local_minimum(params) || !candidates.iter().any(|c| c.1 < 0.0) {
        candidates.push((Competitor::Thermal, 0.0, thermal_x, None));
    }
    candidates.sort_by(|l, r| l.1.total_cmp(&r.1));
    let (best, v_best, x_best, phi_best) = candidates[0];
    let phase = match candidates.get(1) {
        Some(&(second, v, ..)) if v - v_best < 10.0 / params.flux => Phase::Coexistence(best, second),
        _ => match best {
            Competitor::Thermal => Phase::Thermal,
            Competitor::Maser(k) => Phase::Maser(k),
        },
    };
    let slope = phi_best.and_then(|phi| dxdtheta(phi, params.a).ok());
    PhasePoint { params: *params, phase, order_parameter: x_best, slope, minima }
}

/// Slope `dx/dθ = 2(2a−1)^{3/2}|sin φ|³/(tan φ − φ)` along a maser branch.
pub fn dxdtheta(phi: f64, a: f64) -> Result<f64> {
    if a <= 0.5 {
        return Err(Error::NoMaserBranch { a, delta: 0.0 });
    }
    let denom = phi.tan() - phi;
    if denom.abs() <= 1e-13 * phi.abs().max(1.0) {
        return Err(Error::InfiniteSlope(phi));
    }
    let s = (2.0 * a - 1.0).sqrt();
    Ok(2.0 * s * s * s * phi.sin().abs().powi(3) / denom)
}

/// Thermal-phase mean photon number at one pump parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalProfilePoint {
    pub theta: f64,
    /// `⟨n⟩`, or `None` where the geometric form diverges.
    pub mean_n: Option<f64>,
    /// `⟨x⟩ = ⟨n⟩/N`.
    pub mean_x: Option<f64>,
}

/// `⟨n⟩(θ) = (n_b + aθ_eff²)/(1 + (1−2a)θ_eff²)` along a θ grid.
pub fn thermal_mean_profile(a: f64, nb: f64, delta: f64, thetas: &[f64], flux: f64) -> Vec<ThermalProfilePoint> {
    thetas
        .iter()
        .map(|&theta| {
            let te2 = theta_eff_sq(theta, delta);
            let denom = 1.0 + (1.0 - 2.0 * a) * te2;
            let mean_n = (denom > 0.0).then(|| (nb + a * te2) / denom);
            ThermalProfilePoint { theta, mean_n, mean_x: mean_n.map(|n| n / flux) }
        })
        .collect()
}

/// Extremes of the periodic thermal `⟨n⟩(θ)` at nonzero detuning: the
/// maximum at `|Δ|θ = (n+1/2)π` and the minimum `n_b` at `|Δ|θ = nπ`.
pub fn thermal_mean_extrema(a: f64, nb: f64, delta: f64) -> Result<(f64, f64)> {
    if delta == 0.0 {
        return Err(Error::Domain("the thermal profile is periodic only for delta != 0".into()));
    }
    let inv_d2 = 1.0 / (delta * delta);
    let denom = 1.0 + (1.0 - 2.0 * a) * inv_d2;
    if denom <= 0.0 {
        return Err(Error::Divergent((2.0 * a - 1.0) * inv_d2));
    }
    Ok(((nb + a * inv_d2) / denom, nb))
}

/// Exact finite-N order parameter at one value of `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderPoint {
    pub a: f64,
    pub x_mean: f64,
    pub x_std: f64,
}

/// Exact `⟨x⟩` and its spread along an `a` grid at fixed `θ` and `N`.
pub fn order_parameter_vs_a(nb: f64, delta: f64, theta: f64, flux: f64, a_grid: &[f64]) -> Result<Vec<OrderPoint>> {
    a_grid
        .iter()
        .map(|&a| {
            let dist = stationary_distribution(&MaserParams::new(a, nb, delta, theta, flux)?, DEFAULT_TAIL_TOL)?;
            Ok(OrderPoint { a, x_mean: dist.mean_x(), x_std: dist.std_x() })
        })
        .collect()
}

/// Steps of an order-parameter curve: for each maximal run of grid
/// intervals steeper than `min_slope`, the midpoint of the steepest one.
pub fn step_locations(curve: &[OrderPoint], min_slope: f64) -> Vec<f64> {
    let mut steps = Vec::new();
    let mut best: Option<(f64, f64)> = None;
    for pair in curve.windows(2) {
        let slope = (pair[1].x_mean - pair[0].x_mean) / (pair[1].a - pair[0].a);
        let mid = 0.5 * (pair[0].a + pair[1].a);
        if slope > min_slope {
            if best.map_or(true, |(s, _)| slope > s) {
                best = Some((slope, mid));
            }
        } else if let Some((_, at)) = best.take() {
            steps.push(at);
        }
    }
    steps.extend(best.map(|(_, at)| at));
    steps
}

/// Type of a critical line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryKind {
    /// `θ₀*(a)`.
    SecondOrderThermalMaser,
    /// `θ*_{k,k+1}(a)`.
    FirstOrderMaserMaser(usize),
    /// `θ*_{tk}(a)`.
    FirstOrderThermalMaser(usize),
    /// `θ*_{kt}(a)`.
    SecondOrderMaserThermal(usize),
    /// Auxiliary line `θ = (kπ + φ₀)/|Δ|` bounding the region where the
    /// thermal distribution converges, `k ≥ 1`.
    ThermalValidity(usize),
}

/// One vertex of a critical line with the residual of its defining equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryVertex {
    pub a: f64,
    pub theta: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseBoundary {
    pub kind: BoundaryKind,
    /// Vertices sorted by `a`.
    pub points: Vec<BoundaryVertex>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDiagram {
    pub nb: f64,
    pub delta: f64,
    pub boundaries: Vec<PhaseBoundary>,
    pub triple_points: Vec<TriplePoint>,
}

/// Residual of `(2a−1) θ_eff² = 1`, shared by all closed-form lines.
fn convergence_residual(a: f64, delta: f64, theta: f64) -> f64 {
    ((2.0 * a - 1.0) * theta_eff_sq(theta, delta) - 1.0).abs()
}

/// Default `a` grid of the phase diagram, `[0.5, 1]` in steps of 0.002.
pub fn default_a_grid() -> Vec<f64> {
    (0..=250).map(|i| 0.5 + 0.002 * i as f64).collect()
}

/// All critical lines for branch indices up to `k_max` along `a_grid`.
pub fn phase_diagram_up_to(nb: f64, delta: f64, a_grid: &[f64], k_max: usize) -> PhaseDiagram {
    let mut a_sorted: Vec<f64> = a_grid.to_vec();
    a_sorted.sort_by(f64::total_cmp);
    let mut kinds = vec![BoundaryKind::SecondOrderThermalMaser];
    if delta == 0.0 {
        kinds.extend((0..=k_max).map(BoundaryKind::FirstOrderMaserMaser));
    } else {
        for k in 0..=k_max {
            kinds.push(BoundaryKind::SecondOrderMaserThermal(k));
            if k >= 1 {
                kinds.push(BoundaryKind::FirstOrderThermalMaser(k));
                kinds.push(BoundaryKind::ThermalValidity(k));
            }
            kinds.push(BoundaryKind::FirstOrderMaserMaser(k));
        }
    }
    let vertex = |kind: BoundaryKind, a: f64| -> Option<BoundaryVertex> {
        let theta = match kind {
            BoundaryKind::SecondOrderThermalMaser => theta0_star(a, delta).ok()?,
            BoundaryKind::FirstOrderMaserMaser(k) => theta_maser_maser(a, nb, delta, k).ok()?,
            BoundaryKind::FirstOrderThermalMaser(k) => theta_thermal_maser(a, nb, delta, k).ok()?,
            BoundaryKind::SecondOrderMaserThermal(k) => {
                let theta = theta_maser_thermal(a, delta, k).ok()?;
                // Only a transition while branch k is the global minimum near its end.
                let before = point(a, nb, delta, theta * (1.0 - 1e-9));
                let v_end = Branch::new(a, delta, k).ok().and_then(|b| minimum_potential(&b, &before, before.theta))?;
                if !(v_end.1 <= 0.0 && no_lower_minimum(&before, v_end.1, &[k])) {
                    return None;
                }
                theta
            }
            BoundaryKind::ThermalValidity(k) => (k as f64 * PI + phi0(a, delta).ok()?) / delta.abs(),
        };
        let residual = match kind {
            BoundaryKind::FirstOrderMaserMaser(k) => {
                let p = point(a, nb, delta, theta);
                let v0 = minimum_potential(&Branch::new(a, delta, k).ok()?, &p, theta)?.1;
                let v1 = minimum_potential(&Branch::new(a, delta, k + 1).ok()?, &p, theta)?.1;
                (v0 - v1).abs()
            }
            BoundaryKind::FirstOrderThermalMaser(k) => {
                let p = point(a, nb, delta, theta);
                minimum_potential(&Branch::new(a, delta, k).ok()?, &p, theta)?.1.abs()
            }
            _ => convergence_residual(a, delta, theta),
        };
        Some(BoundaryVertex { a, theta, residual })
    };
    let boundaries = kinds
        .into_iter()
        .map(|kind| PhaseBoundary { kind, points: a_sorted.iter().filter_map(|&a| vertex(kind, a)).collect() })
        .filter(|b| !b.points.is_empty())
        .collect();
    let triple_points =
        if delta == 0.0 { Vec::new() } else { triple_points_up_to(nb, delta, k_max).unwrap_or_default() };
    PhaseDiagram { nb, delta, boundaries, triple_points }
}

/// Critical lines for branch indices up to 3.
pub fn phase_diagram(nb: f64, delta: f64, a_grid: &[f64]) -> PhaseDiagram {
    phase_diagram_up_to(nb, delta, a_grid, 3)
}

/// `x` on the minimum sub-branch of branch `k` at pump parameter `theta`.
pub fn branch_minimum_x(a: f64, delta: f64, k: usize, theta: f64) -> Option<f64> {
    let phi = Branch::new(a, delta, k).ok()?.solve(theta, a, SaddleKind::Minimum)?;
    Some(x_of_phi(phi, a, delta))
}
