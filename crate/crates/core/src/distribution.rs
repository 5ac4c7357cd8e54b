//! Exact stationary photon distributions and their moments.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::model::{q_over_x, MaserParams};
use crate::numerics::logsumexp;

/// Default bound on the probability mass discarded by truncation.
pub const DEFAULT_TAIL_TOL: f64 = 1e-14;

const MAX_N: usize = 1 << 26;

/// Moments of a photon distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    /// `P_n = Σ_{m<n} p̄_m` for `n = 0..=len`.
    pub cumulative: Vec<f64>,
    /// `⟨q_n⟩ = Σ q(n/N) p̄_n`.
    pub mean_q: f64,
}

/// A truncated, normalized photon-number distribution `p̄_n`, `n = 0..=n_max`.
///
/// Exact zeros are carried as `-inf` log-weights.
#[derive(Debug)]
pub struct PhotonDistribution {
    params: MaserParams,
    log_weights: Vec<f64>,
    probs: Vec<f64>,
    tail_mass_bound: f64,
    moments: OnceLock<Moments>,
}

impl Clone for PhotonDistribution {
    fn clone(&self) -> Self {
        Self {
            params: self.params,
            log_weights: self.log_weights.clone(),
            probs: self.probs.clone(),
            tail_mass_bound: self.tail_mass_bound,
            moments: self.moments.clone(),
        }
    }
}

impl PhotonDistribution {
    fn from_log_weights(params: MaserParams, log_weights: Vec<f64>, tail_mass_bound: f64) -> Self {
        let lse = logsumexp(&log_weights);
        let probs = log_weights.iter().map(|lw| (lw - lse).exp()).collect();
        Self { params, log_weights, probs, tail_mass_bound, moments: OnceLock::new() }
    }

    pub fn params(&self) -> &MaserParams {
        &self.params
    }

    /// Unnormalized log-probabilities; `-inf` marks an exact zero.
    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Largest photon number kept.
    pub fn n_max(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn tail_mass_bound(&self) -> f64 {
        self.tail_mass_bound
    }

    /// Mean, variance, cumulative probabilities and `⟨q_n⟩`, computed once.
    pub fn moments(&self) -> &Moments {
        self.moments.get_or_init(|| {
            let mean: f64 = self.probs.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
            let variance = self.probs.iter().enumerate().map(|(n, p)| (n as f64 - mean).powi(2) * p).sum();
            let mut cumulative = Vec::with_capacity(self.probs.len() + 1);
            let mut acc = 0.0;
            cumulative.push(0.0);
            for p in &self.probs {
                acc += p;
                cumulative.push(acc);
            }
            let MaserParams { theta, delta, flux, .. } = self.params;
            let mean_q = self
                .probs
                .iter()
                .enumerate()
                .filter(|(_, p)| **p > 0.0)
                .map(|(n, p)| {
                    let x = n as f64 / flux;
                    x * q_over_x(x, theta, delta) * p
                })
                .sum();
            Moments { mean, variance, cumulative, mean_q }
        })
    }

    /// Order parameter `⟨x⟩ = ⟨n⟩/N`.
    pub fn mean_x(&self) -> f64 {
        self.moments().mean / self.params.flux
    }

    /// Standard deviation of `x = n/N`.
    pub fn std_x(&self) -> f64 {
        self.moments().variance.sqrt() / self.params.flux
    }
}

/// Rate of the `n → n+1` transition (units of γ).
#[inline]
pub(crate) fn up_rate(n: usize, p: &MaserParams) -> f64 {
    let m = (n + 1) as f64;
    let x = m / p.flux;
    p.nb * m + p.a * m * q_over_x(x, p.theta, p.delta)
}

/// Rate of the `n → n−1` transition (units of γ).
#[inline]
pub(crate) fn down_rate(n: usize, p: &MaserParams) -> f64 {
    let m = n as f64;
    let x = m / p.flux;
    (1.0 + p.nb) * m + p.b() * m * q_over_x(x, p.theta, p.delta)
}

/// Log-weights `ln p̄_n − ln p̄_0` for `n = 0..len` from the detailed-balance product.
pub(crate) fn stationary_log_weights(p: &MaserParams, len: usize) -> Vec<f64> {
    let mut lw = Vec::with_capacity(len);
    lw.push(0.0);
    extend_log_weights(p, &mut lw, len);
    lw
}

fn extend_log_weights(p: &MaserParams, lw: &mut Vec<f64>, len: usize) {
    while lw.len() < len {
        let n = lw.len();
        let prev = lw[n - 1];
        if prev == f64::NEG_INFINITY {
            lw.push(f64::NEG_INFINITY);
            continue;
        }
        let up = up_rate(n - 1, p);
        lw.push(if up == 0.0 { f64::NEG_INFINITY } else { prev + up.ln() - down_rate(n, p).ln() });
    }
}

/// Initial truncation guess: support reaches `x ≤ 2a − 1` plus Gaussian width.
pub(crate) fn initial_n_max(p: &MaserParams) -> usize {
    let n = p.flux;
    let guess = n * (p.inversion() + p.delta * p.delta) + 12.0 * (n * p.nb + n).sqrt() + 40.0;
    guess.max(64.0).ceil() as usize
}

/// Supremum of `p̄_{n+1}/p̄_n` over `n ≥ n_from`.
fn ratio_bound(p: &MaserParams, n_from: usize) -> f64 {
    let m = (n_from + 1) as f64;
    let full_gain = (p.nb * m + p.flux * p.a) / ((1.0 + p.nb) * m + p.flux * p.b());
    full_gain.max(p.nb / (1.0 + p.nb))
}

/// Exact stationary distribution with adaptive truncation so that the
/// discarded tail mass stays below `tol`.
pub fn stationary_distribution(params: &MaserParams, tol: f64) -> Result<PhotonDistribution> {
    params.validate()?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter { name: "tol", value: tol, reason: "must be > 0" });
    }
    let mut n_max = initial_n_max(params);
    let mut lw = stationary_log_weights(params, n_max + 1);
    loop {
        let last = lw[n_max];
        let max = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tail = if last == f64::NEG_INFINITY {
            0.0
        } else {
            let r = ratio_bound(params, n_max);
            if r < 1.0 {
                (last - logsumexp(&lw)).exp() * r / (1.0 - r)
            } else {
                f64::INFINITY
            }
        };
        if last < max - 36.0 && tail < tol {
            return Ok(PhotonDistribution::from_log_weights(*params, lw, tail));
        }
        n_max *= 2;
        if n_max > MAX_N {
            return Err(Error::TruncationFailure { n_max });
        }
        extend_log_weights(params, &mut lw, n_max + 1);
    }
}

/// Geometric distribution valid in the thermal phase.
pub fn thermal_distribution(params: &MaserParams) -> Result<PhotonDistribution> {
    thermal_distribution_with_tol(params, DEFAULT_TAIL_TOL)
}

pub fn thermal_distribution_with_tol(params: &MaserParams, tol: f64) -> Result<PhotonDistribution> {
    params.validate()?;
    let te2 = params.theta_eff_sq();
    let drive = te2 * params.inversion();
    if drive >= 1.0 {
        return Err(Error::Divergent(drive));
    }
    let ratio = thermal_ratio(params);
    if ratio == 0.0 {
        return Ok(PhotonDistribution::from_log_weights(*params, vec![0.0], 0.0));
    }
    let n_max = (tol.ln() / ratio.ln()).ceil().max(1.0) as usize;
    if n_max > MAX_N {
        return Err(Error::TruncationFailure { n_max });
    }
    let ln_r = ratio.ln();
    let ln_p0 = (1.0 - ratio).ln();
    let log_weights: Vec<f64> = (0..=n_max).map(|n| ln_p0 + n as f64 * ln_r).collect();
    let probs = log_weights.iter().map(|v| v.exp()).collect();
    Ok(PhotonDistribution {
        params: *params,
        log_weights,
        probs,
        tail_mass_bound: ratio.powi(n_max as i32 + 1),
        moments: OnceLock::new(),
    })
}

/// Ratio `(n_b + aθ_eff²)/(1 + n_b + bθ_eff²)` of the geometric form.
pub fn thermal_ratio(params: &MaserParams) -> f64 {
    let te2 = params.theta_eff_sq();
    (params.nb + params.a * te2) / (1.0 + params.nb + params.b() * te2)
}
