//! Trapping states: pump parameters where `q_m = 0` cuts the photon ladder,
//! their dips in `⟨x⟩`, the peaks they leave in the correlation length, and
//! the fluctuation width `Δx`.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::correlation::exact_correlation;
use crate::distribution::{stationary_distribution, DEFAULT_TAIL_TOL};
use crate::error::{Error, Result};
use crate::model::MaserParams;
use crate::phase::branch_minimum_x;

/// Default upper limit on `x_tr = m/N` when listing trapping states.
pub const DEFAULT_X_MAX: f64 = 1.0;

/// Minimum depth below the neighbour interpolation for a grid point to count
/// as a dip.
pub const DIP_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrappingState {
    /// Photon number at which the ladder is cut.
    pub m: usize,
    /// Sine-zero index.
    pub k: usize,
    pub theta_tr: f64,
    pub x_tr: f64,
}

impl TrappingState {
    /// Trapping state `(m, k)` for flux `N` and detuning `Δ`; `None` when
    /// `m/N + Δ² = 0`.
    pub fn new(m: usize, k: usize, flux: f64, delta: f64) -> Option<Self> {
        let x_tr = m as f64 / flux;
        let r = (x_tr + delta * delta).sqrt();
        (k > 0 && r > 0.0).then(|| Self { m, k, theta_tr: k as f64 * PI / r, x_tr })
    }

    /// `|θ^tr·√(x_tr + Δ²) − kπ|`.
    pub fn residual(&self, delta: f64) -> f64 {
        (self.theta_tr * (self.x_tr + delta * delta).sqrt() - self.k as f64 * PI).abs()
    }
}

/// Smallest pump parameter at which a trapping state with `x_tr ≤ 1` occurs.
pub fn theta_min(delta: f64) -> f64 {
    PI / (1.0 + delta * delta).sqrt()
}

/// All trapping states with `θ^tr` in `[lo, hi]` and `x_tr ≤ x_max`, sorted
/// by `θ`.
pub fn trapping_thetas(flux: f64, delta: f64, window: (f64, f64), x_max: f64) -> Result<Vec<TrappingState>> {
    if !(flux > 0.0) || !flux.is_finite() {
        return Err(Error::InvalidParameter { name: "flux", value: flux, reason: "must be positive and finite" });
    }
    let (lo, hi) = window;
    if !(lo <= hi) || !(x_max >= 0.0) || !x_max.is_finite() {
        return Err(Error::Domain(format!("bad trapping window [{lo}, {hi}] with x_max = {x_max}")));
    }
    let m_max = (x_max * flux).floor() as usize;
    let d2 = delta * delta;
    let mut states = Vec::new();
    for m in 0..=m_max {
        let r = (m as f64 / flux + d2).sqrt();
        if r == 0.0 {
            continue;
        }
        let k_lo = ((lo * r / PI).ceil() as usize).max(1);
        let k_hi = (hi * r / PI).floor();
        if k_hi < 1.0 {
            continue;
        }
        for k in k_lo.saturating_sub(1).max(1)..=k_hi as usize + 1 {
            if let Some(s) = TrappingState::new(m, k, flux, delta) {
                if s.theta_tr >= lo && s.theta_tr <= hi {
                    states.push(s);
                }
            }
        }
    }
    states.sort_by(|a, b| a.theta_tr.total_cmp(&b.theta_tr).then(a.m.cmp(&b.m)));
    Ok(states)
}

/// Photon-number level `x_k(θ)` cut by the `k`-th sine zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrappingLevel {
    /// `(kπ/θ)² − Δ²`, possibly negative.
    pub raw: f64,
    /// `raw` clamped at zero.
    pub x: f64,
    /// False when `raw < 0`: no photon number reaches this zero.
    pub physical: bool,
}

pub fn x_of_trapping(theta: f64, delta: f64, k: usize) -> Result<TrappingLevel> {
    if !(theta > 0.0) {
        return Err(Error::InvalidParameter { name: "theta", value: theta, reason: "must be positive" });
    }
    let s = k as f64 * PI / theta;
    let raw = s * s - delta * delta;
    Ok(TrappingLevel { raw, x: raw.max(0.0), physical: raw >= 0.0 })
}

/// Exact finite-`N` standard deviation of `x = n/N`.
pub fn std_x(params: &MaserParams) -> Result<f64> {
    Ok(stationary_distribution(params, DEFAULT_TAIL_TOL)?.std_x())
}

fn require_trapping(params: &MaserParams) -> Result<()> {
    if params.nb != 0.0 {
        return Err(Error::Precondition(format!("trapping needs n_b = 0, got {}", params.nb)));
    }
    Ok(())
}

fn mean_x_curve(params: &MaserParams, thetas: &[f64]) -> Result<Vec<f64>> {
    thetas.par_iter().map(|&t| Ok(stationary_distribution(&params.with_theta(t), DEFAULT_TAIL_TOL)?.mean_x())).collect()
}

/// Trapping state nearest to `theta`, searching one unit of `θ` either side.
fn nearest_state(theta: f64, flux: f64, delta: f64) -> Option<TrappingState> {
    trapping_thetas(flux, delta, (theta - 1.0, theta + 1.0), DEFAULT_X_MAX)
        .ok()?
        .into_iter()
        .min_by(|a, b| (a.theta_tr - theta).abs().total_cmp(&(b.theta_tr - theta).abs()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dip {
    pub theta: f64,
    pub mean_x: f64,
    /// Depth below the linear interpolation of the two grid neighbours.
    pub depth: f64,
    pub nearest: Option<TrappingState>,
    /// `|θ − θ^tr|` for the nearest trapping state.
    pub distance: f64,
    /// Mean-field branch `k − 1` minimum minus `⟨x⟩`, where that branch exists.
    pub mean_field_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DipReport {
    pub thetas: Vec<f64>,
    pub mean_x: Vec<f64>,
    pub dips: Vec<Dip>,
}

impl DipReport {
    pub fn max_depth(&self) -> f64 {
        self.dips.iter().map(|d| d.depth).fold(0.0, f64::max)
    }

    pub fn total_depth(&self) -> f64 {
        self.dips.iter().map(|d| d.depth).sum()
    }
}

/// Scans `⟨x⟩(θ)` at `n_b = 0` and reports local minima deeper than
/// [`DIP_THRESHOLD`], each matched to its nearest trapping state.
pub fn dip_scan(params: &MaserParams, thetas: &[f64]) -> Result<DipReport> {
    require_trapping(params)?;
    let xs = mean_x_curve(params, thetas)?;
    let mut dips = Vec::new();
    for i in 1..thetas.len().saturating_sub(1) {
        let (l, c, r) = (xs[i - 1], xs[i], xs[i + 1]);
        if !(c < l && c < r) {
            continue;
        }
        let w = (thetas[i] - thetas[i - 1]) / (thetas[i + 1] - thetas[i - 1]);
        let depth = l + w * (r - l) - c;
        if depth <= DIP_THRESHOLD {
            continue;
        }
        let theta = thetas[i];
        let nearest = nearest_state(theta, params.flux, params.delta);
        let mean_field_gap =
            nearest.and_then(|s| branch_minimum_x(params.a, params.delta, s.k - 1, theta)).map(|x| x - c);
        dips.push(Dip {
            theta,
            mean_x: c,
            depth,
            distance: nearest.map_or(f64::INFINITY, |s| (s.theta_tr - theta).abs()),
            nearest,
            mean_field_gap,
        });
    }
    Ok(DipReport { thetas: thetas.to_vec(), mean_x: xs, dips })
}

/// `ln γξ` on a `θ` grid at one flux, with its local maxima.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationCurve {
    pub flux: f64,
    pub thetas: Vec<f64>,
    pub ln_gamma_xi: Vec<f64>,
    pub peaks: Vec<f64>,
}

impl CorrelationCurve {
    /// Peaks per unit `θ`.
    pub fn peak_density(&self) -> f64 {
        match (self.thetas.first(), self.thetas.last()) {
            (Some(a), Some(b)) if b > a => self.peaks.len() as f64 / (b - a),
            _ => 0.0,
        }
    }
}

/// `ln γξ` at `θ^tr + j·h` for `j = −2..=2`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrappingRefinement {
    pub flux: f64,
    pub state: TrappingState,
    pub step: f64,
    pub ln_gamma_xi: [f64; 5],
}

impl TrappingRefinement {
    /// True when the value exactly at `θ^tr` is below both nearest samples.
    pub fn locally_smaller(&self) -> bool {
        let v = &self.ln_gamma_xi;
        v[2] < v[1] && v[2] < v[3]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeakDipMatch {
    pub flux: f64,
    pub dip: f64,
    pub depth: f64,
    /// Nearest correlation peak, if any.
    pub peak: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrappingScanReport {
    pub curves: Vec<CorrelationCurve>,
    pub matches: Vec<PeakDipMatch>,
    pub refinements: Vec<TrappingRefinement>,
}

fn ln_gamma_xi(params: &MaserParams) -> f64 {
    exact_correlation(params).map_or(f64::NAN, |c| c.ln_gamma_xi)
}

fn local_maxima(thetas: &[f64], values: &[f64]) -> Vec<f64> {
    (1..values.len().saturating_sub(1))
        .filter(|&i| values[i] > values[i - 1] && values[i] > values[i + 1])
        .map(|i| thetas[i])
        .collect()
}

pub fn correlation_curve(params: &MaserParams, thetas: &[f64]) -> CorrelationCurve {
    let ln: Vec<f64> = thetas.par_iter().map(|&t| ln_gamma_xi(&params.with_theta(t))).collect();
    CorrelationCurve { flux: params.flux, thetas: thetas.to_vec(), peaks: local_maxima(thetas, &ln), ln_gamma_xi: ln }
}

/// Samples `ln γξ` at `θ^tr + j·step`, `j = −2..=2`.
pub fn refine_at_trapping(params: &MaserParams, state: TrappingState, step: f64) -> TrappingRefinement {
    let mut ln = [0.0; 5];
    for (j, v) in ln.iter_mut().enumerate() {
        let theta = if j == 2 { state.theta_tr } else { state.theta_tr + (j as f64 - 2.0) * step };
        *v = ln_gamma_xi(&params.with_theta(theta));
    }
    TrappingRefinement { flux: params.flux, state, step, ln_gamma_xi: ln }
}

/// Correlation length across trapping states at `n_b = 0` for several
/// fluxes: peaks per flux, the nearest peak to every `⟨x⟩` dip, and a
/// five-point refinement around the trapping state behind each dip.
pub fn correlation_trapping_scan(params: &MaserParams, fluxes: &[f64], thetas: &[f64]) -> Result<TrappingScanReport> {
    require_trapping(params)?;
    let (Some(&lo), Some(&hi)) = (thetas.first(), thetas.last()) else {
        return Ok(TrappingScanReport { curves: vec![], matches: vec![], refinements: vec![] });
    };
    let step = if thetas.len() > 1 { (hi - lo) / (thetas.len() - 1) as f64 } else { 0.0 };
    let mut curves = Vec::new();
    let mut matches = Vec::new();
    let mut refinements = Vec::new();
    for &flux in fluxes {
        let at = params.with_flux(flux);
        at.validate()?;
        let curve = correlation_curve(&at, thetas);
        for dip in dip_scan(&at, thetas)?.dips {
            if step > 0.0 {
                if let Some(state) = dip.nearest {
                    if !refinements.iter().any(|r: &TrappingRefinement| r.flux == flux && r.state == state) {
                        refinements.push(refine_at_trapping(&at, state, step));
                    }
                }
            }
            let peak =
                curve.peaks.iter().copied().min_by(|a, b| (a - dip.theta).abs().total_cmp(&(b - dip.theta).abs()));
            matches.push(PeakDipMatch { flux, dip: dip.theta, depth: dip.depth, peak });
        }
        curves.push(curve);
    }
    Ok(TrappingScanReport { curves, matches, refinements })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{Branch, SaddleKind};
    use proptest::prelude::*;

    fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
        let n = ((hi - lo) / step).round() as usize;
        (0..=n).map(|i| lo + i as f64 * step).collect()
    }

    fn base(delta: f64, flux: f64) -> MaserParams {
        MaserParams::new(1.0, 0.0, delta, 3.0, flux).unwrap()
    }

    #[test]
    fn trapping_examples() {
        let states = trapping_thetas(100.0, 0.0, (3.0, 7.0), 1.0).unwrap();
        let find = |m, k| states.iter().find(|s| s.m == m && s.k == k).copied();
        assert!((find(100, 1).unwrap().theta_tr - PI).abs() < 1e-15);
        assert!((find(25, 1).unwrap().theta_tr - 2.0 * PI).abs() < 1e-15);
        assert!(states.windows(2).all(|w| w[0].theta_tr <= w[1].theta_tr));
        for s in &states {
            assert!(s.residual(0.0) < 1e-12);
            assert!(s.theta_tr >= 3.0 && s.theta_tr <= 7.0);
        }
        // The window is complete: brute-force enumeration finds the same set.
        let mut brute = 0;
        for m in 1..=100 {
            for k in 1..10 {
                let t = k as f64 * PI / (m as f64 / 100.0).sqrt();
                if (3.0..=7.0).contains(&t) {
                    brute += 1;
                }
            }
        }
        assert_eq!(states.len(), brute);
        assert!(trapping_thetas(100.0, 0.0, (0.0, 100.0), 1.0).unwrap().iter().all(|s| s.m > 0));
    }

    #[test]
    fn x_of_trapping_examples() {
        let l = x_of_trapping(PI, 0.0, 1).unwrap();
        assert!((l.raw - 1.0).abs() < 1e-15 && l.physical);
        assert!(x_of_trapping(2.0 * PI, 0.5, 1).unwrap().raw.abs() < 1e-15);
        let l = x_of_trapping(10.0, 0.5, 1).unwrap();
        assert!(!l.physical && l.x == 0.0 && l.raw < 0.0);
        assert!(x_of_trapping(0.0, 0.0, 1).is_err());
    }

    #[test]
    fn theta_min_bound() {
        for delta in [0.0, 0.3, 0.5, 1.0, 2.0] {
            let states = trapping_thetas(100.0, delta, (0.0, 20.0), 1.0).unwrap();
            let min = states.iter().map(|s| s.theta_tr).fold(f64::INFINITY, f64::min);
            assert!((min - theta_min(delta)).abs() < 1e-12, "Δ = {delta}");
            assert!(states.iter().all(|s| s.theta_tr >= theta_min(delta) - 1e-12));
        }
    }

    #[test]
    fn levels_interleave_mean_field_branches() {
        let mut checked = 0;
        for theta in grid(3.0, 15.0, 0.01) {
            for k in 1..6 {
                let lower = Branch::new(1.0, 0.0, k - 1).unwrap().solve(theta, 1.0, SaddleKind::Minimum);
                let upper = Branch::new(1.0, 0.0, k).unwrap().solve(theta, 1.0, SaddleKind::Minimum);
                let (Some(lo), Some(hi)) = (lower, upper) else { continue };
                let x_lo = crate::potential::x_of_phi(lo, 1.0, 0.0);
                let x_hi = crate::potential::x_of_phi(hi, 1.0, 0.0);
                let x_k = x_of_trapping(theta, 0.0, k).unwrap().raw;
                assert!(x_lo < x_k && x_k < x_hi, "θ = {theta}, k = {k}: {x_lo} {x_k} {x_hi}");
                checked += 1;
            }
        }
        assert!(checked > 1000);
    }

    #[test]
    fn detuning_shift_identity() {
        for theta in grid(3.0, 15.0, 0.25) {
            for k in 1..4 {
                let shift = x_of_trapping(theta, 0.5, k).unwrap().raw - x_of_trapping(theta, 0.0, k).unwrap().raw;
                assert!((shift + 0.25).abs() < 1e-12);
            }
            for phi in [0.9, 2.0, 4.6, 7.9] {
                let t = crate::potential::theta_of_phi(phi, 1.0);
                let x = |d: f64| phi * phi / (t * t) - d * d;
                let shift = crate::potential::x_of_phi(phi, 1.0, 0.5) - crate::potential::x_of_phi(phi, 1.0, 0.0);
                assert!((shift + 0.25).abs() < 1e-12 && (x(0.5) - x(0.0) + 0.25).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn trapping_zeros_are_exact() {
        for (m, k) in [(25, 1), (100, 1), (16, 1), (64, 2)] {
            let s = TrappingState::new(m, k, 100.0, 0.0).unwrap();
            let d = stationary_distribution(&base(0.0, 100.0).with_theta(s.theta_tr), DEFAULT_TAIL_TOL).unwrap();
            assert!(d.probs().iter().skip(m + 1).all(|&p| p == 0.0), "(m, k) = ({m}, {k})");
            assert!(d.probs()[..=m.min(d.len() - 1)].iter().any(|&p| p > 0.0));
        }
    }

    #[test]
    fn std_x_examples() {
        let vac = MaserParams::new(1.0, 0.0, 0.0, 0.0, 100.0).unwrap();
        assert_eq!(std_x(&vac).unwrap(), 0.0);
        let maser = MaserParams::new(1.0, 0.15, 0.0, 5.0, 1000.0).unwrap();
        let d = stationary_distribution(&maser, DEFAULT_TAIL_TOL).unwrap();
        assert!(std_x(&maser).unwrap() / d.mean_x() < 0.1);
        let coexist = maser.with_theta(6.661022);
        let d = stationary_distribution(&coexist, DEFAULT_TAIL_TOL).unwrap();
        assert!(std_x(&coexist).unwrap() / d.mean_x() > 0.3);
    }

    #[test]
    fn dip_scan_requires_zero_temperature() {
        let hot = MaserParams::new(1.0, 0.15, 0.0, 3.0, 100.0).unwrap();
        assert!(matches!(dip_scan(&hot, &[5.0, 6.0, 7.0]), Err(Error::Precondition(_))));
        assert!(matches!(correlation_trapping_scan(&hot, &[100.0], &[5.0, 6.0]), Err(Error::Precondition(_))));
    }

    #[test]
    fn dips_sit_on_trapping_states() {
        let step = 5e-3;
        let thetas = grid(3.0, 15.0, step);
        let report = dip_scan(&base(0.0, 100.0), &thetas).unwrap();
        assert!(report.dips.len() >= 10);
        for d in &report.dips {
            assert!(d.distance <= step, "dip at {} is {} from a trapping state", d.theta, d.distance);
        }
        // θ*₀₁ is independent of n_b; below it trapping barely moves ⟨x⟩.
        let theta01 = crate::phase::theta_maser_maser(1.0, 0.15, 0.0, 0).unwrap();
        for d in report.dips.iter().filter(|d| d.theta < theta01) {
            assert!(d.depth < 0.05 * d.mean_x, "dip at {} depth {}", d.theta, d.depth);
        }
        let detuned = dip_scan(&base(0.5, 100.0), &thetas).unwrap();
        assert!(detuned.dips.len() < report.dips.len());
        assert!(detuned.max_depth() < report.max_depth());
        assert!(detuned.total_depth() < report.total_depth());
    }

    #[test]
    fn correlation_peaks_track_trapping() {
        let step = 5e-3;
        let thetas = grid(3.0, 15.0, step);
        let report = correlation_trapping_scan(&base(0.0, 25.0), &[25.0, 50.0, 100.0], &thetas).unwrap();
        let counts: Vec<usize> = report.curves.iter().map(|c| c.peaks.len()).collect();
        assert!(counts.windows(2).all(|w| w[0] <= w[1]) && counts[2] > counts[0], "{counts:?}");
        let significant: Vec<_> = report.matches.iter().filter(|m| m.depth > 1e-3).collect();
        assert!(significant.len() >= 20);
        for m in significant {
            let peak = m.peak.expect("every dip has a correlation peak");
            assert!((peak - m.dip).abs() <= step + 1e-12, "N = {}: dip {} peak {peak}", m.flux, m.dip);
        }
        assert_eq!(report.refinements.len(), report.matches.len());
        for r in &report.refinements {
            assert!(r.locally_smaller(), "{r:?}");
        }
    }

    proptest! {
        #[test]
        fn states_satisfy_their_definition(flux in 10.0f64..500.0, delta in 0.0f64..1.0, lo in 0.0f64..20.0) {
            for s in trapping_thetas(flux, delta, (lo, lo + 3.0), 1.0).unwrap() {
                prop_assert!(s.residual(delta) < 1e-12);
                prop_assert!(s.theta_tr > theta_min(delta) - 1e-12);
                let level = x_of_trapping(s.theta_tr, delta, s.k).unwrap();
                prop_assert!((level.raw - s.x_tr).abs() < 1e-12);
            }
        }
    }
}
