//! Outgoing-atom statistics and their time correlations.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{build_generator, GeneratorMatrix};
use crate::error::{Error, Result};
use crate::model::{q_over_x, MaserParams};
use crate::numerics::tridiag::solve_tridiagonal;

/// Final state of an outgoing atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    pub fn sign(self) -> f64 {
        match self {
            Spin::Up => 1.0,
            Spin::Down => -1.0,
        }
    }
}

/// Probabilities of leaving the cavity excited or in the ground state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomStatistics {
    pub plus: f64,
    pub minus: f64,
}

impl AtomStatistics {
    /// `⟨s⟩ = P(+) − P(−)`.
    pub fn mean_spin(&self) -> f64 {
        self.plus - self.minus
    }
}

fn q_at(n: usize, p: &MaserParams) -> f64 {
    let x = n as f64 / p.flux;
    x * q_over_x(x, p.theta, p.delta)
}

/// Column sums `Σ_n M(s)_{nm}` of the untruncated transition matrices.
fn column_sums(p: &MaserParams, len: usize, s: Spin) -> Vec<f64> {
    let (a, b) = (p.a, p.b());
    (0..len)
        .map(|m| {
            let (qm, qm1) = (q_at(m, p), q_at(m + 1, p));
            match s {
                Spin::Up => b * qm + a * (1.0 - qm1),
                Spin::Down => a * qm1 + b * (1.0 - qm),
            }
        })
        .collect()
}

/// `M(s) v` on `0..len`; the `M(−)` feed into `len` is dropped.
fn apply_m(p: &MaserParams, v: &[f64], s: Spin) -> Vec<f64> {
    let (a, b) = (p.a, p.b());
    let len = v.len();
    (0..len)
        .map(|n| {
            let (qn, qn1) = (q_at(n, p), q_at(n + 1, p));
            match s {
                Spin::Up => {
                    let hop = if n + 1 < len { b * qn1 * v[n + 1] } else { 0.0 };
                    hop + a * (1.0 - qn1) * v[n]
                }
                Spin::Down => {
                    let hop = if n > 0 { a * qn * v[n - 1] } else { 0.0 };
                    hop + b * (1.0 - qn) * v[n]
                }
            }
        })
        .collect()
}

fn stats_from(p: &MaserParams, probs: &[f64]) -> AtomStatistics {
    let dot = |c: Vec<f64>| c.iter().zip(probs).map(|(c, p)| c * p).sum::<f64>();
    let plus = dot(column_sums(p, probs.len(), Spin::Up));
    AtomStatistics { plus, minus: 1.0 - plus }
}

/// `P(±) = Σ_m p̄_m Σ_n M(±)_{nm}` on a truncation of `dim` photon numbers.
pub fn atom_statistics(params: &MaserParams, dim: usize) -> Result<AtomStatistics> {
    let gen = build_generator(params, dim)?;
    Ok(stats_from(params, &gen.stationary[..gen.support]))
}

/// Spectral representation of the two-atom joint probabilities.
///
/// `P(s₁,s₂,t) = P(s₁)P(s₂) + Σ_k e^{−λ_k t} l_k(s₂) r_k(s₁)`, with the sum
/// over the nonzero modes of the symmetrized generator.
#[derive(Debug, Clone)]
pub struct AtomCorrelator {
    pub stats: AtomStatistics,
    /// Nonzero eigenvalues in ascending order.
    pub eigenvalues: Vec<f64>,
    left: [Vec<f64>; 2],
    right: [Vec<f64>; 2],
}

fn idx(s: Spin) -> usize {
    match s {
        Spin::Up => 0,
        Spin::Down => 1,
    }
}

impl AtomCorrelator {
    pub fn new(params: &MaserParams, dim: usize) -> Result<Self> {
        let gen = build_generator(params, dim)?;
        Self::from_generator(&gen)
    }

    pub fn from_generator(gen: &GeneratorMatrix) -> Result<Self> {
        let p = &gen.params;
        let m = gen.support;
        if m < 2 {
            return Err(Error::Domain("stationary state is a single photon number".into()));
        }
        let probs = &gen.stationary[..m];
        let sqrt_p: Vec<f64> = gen.log_stationary[..m].iter().map(|lw| (0.5 * lw).exp()).collect();

        let sym = DMatrix::from_fn(m, m, |i, j| match i.abs_diff(j) {
            0 => gen.symmetrized.diag[i],
            1 => gen.symmetrized.off[i.min(j)],
            _ => 0.0,
        });
        let eig = SymmetricEigen::new(sym);
        let zero_mode = eig.eigenvalues.iamin();

        // Cavity-only generator on the block, its last state reflecting.
        let nb = p.nb;
        let nf = p.flux;
        let cav_sub: Vec<f64> = (0..m - 1).map(|n| -nb * (n + 1) as f64 / nf).collect();
        let cav_sup: Vec<f64> = (1..m).map(|n| -(1.0 + nb) * n as f64 / nf).collect();
        let cav_diag: Vec<f64> = (0..m)
            .map(|n| {
                let up = if n + 1 < m { nb * (n + 1) as f64 } else { 0.0 };
                1.0 + (up + (1.0 + nb) * n as f64) / nf
            })
            .collect();

        let mut left = [Vec::new(), Vec::new()];
        let mut right = [Vec::new(), Vec::new()];
        for s in [Spin::Up, Spin::Down] {
            let c = column_sums(p, m, s);
            let l = DVector::from_iterator(m, c.iter().zip(&sqrt_p).map(|(c, r)| c * r));
            let mp = apply_m(p, probs, s);
            let v = solve_tridiagonal(&cav_sub, &cav_diag, &cav_sup, &mp)
                .ok_or_else(|| Error::Domain("singular cavity propagator".into()))?;
            let r = DVector::from_iterator(m, v.iter().zip(&sqrt_p).map(|(v, r)| if *r > 0.0 { v / r } else { 0.0 }));
            left[idx(s)] = eig.eigenvectors.tr_mul(&l).iter().copied().collect();
            right[idx(s)] = eig.eigenvectors.tr_mul(&r).iter().copied().collect();
        }

        let mut order: Vec<usize> = (0..m).filter(|&k| k != zero_mode).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let pick = |v: &Vec<f64>| order.iter().map(|&k| v[k]).collect::<Vec<f64>>();
        Ok(Self {
            stats: stats_from(p, probs),
            eigenvalues: order.iter().map(|&k| eig.eigenvalues[k]).collect(),
            left: [pick(&left[0]), pick(&left[1])],
            right: [pick(&right[0]), pick(&right[1])],
        })
    }

    /// Smallest nonzero eigenvalue from the dense decomposition.
    pub fn gap(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// `P(s₁,s₂,t) − P(s₁)P(s₂)`.
    pub fn connected(&self, s1: Spin, s2: Spin, t: f64) -> f64 {
        let (l, r) = (&self.left[idx(s2)], &self.right[idx(s1)]);
        self.eigenvalues.iter().zip(l.iter().zip(r)).map(|(lam, (l, r))| (-lam * t).exp() * l * r).sum()
    }

    /// Joint probability of `s₁` and then `s₂` a time `t` later (units of `1/γ`).
    pub fn joint(&self, s1: Spin, s2: Spin, t: f64) -> f64 {
        let single = |s: Spin| if s == Spin::Up { self.stats.plus } else { self.stats.minus };
        single(s1) * single(s2) + self.connected(s1, s2, t)
    }

    /// Normalized correlation `(⟨ss⟩_t − ⟨s⟩²)/(1 − ⟨s⟩²)`.
    pub fn gamma_a(&self, t: f64) -> Result<f64> {
        let mean = self.stats.mean_spin();
        let norm = 1.0 - mean * mean;
        if norm <= 4.0 * f64::EPSILON {
            return Err(Error::UndefinedNormalization(mean));
        }
        let mut acc = 0.0;
        for s1 in [Spin::Up, Spin::Down] {
            for s2 in [Spin::Up, Spin::Down] {
                acc += s1.sign() * s2.sign() * self.connected(s1, s2, t);
            }
        }
        Ok(acc / norm)
    }

    /// Correlation time from a least-squares fit of `ln|γ_A(t)|` on
    /// `samples` equally spaced times in `[t_lo, t_hi]`.
    pub fn fitted_correlation_time(&self, t_lo: f64, t_hi: f64, samples: usize) -> Result<f64> {
        let mut pts = Vec::with_capacity(samples);
        for i in 0..samples {
            let t = t_lo + (t_hi - t_lo) * i as f64 / (samples - 1) as f64;
            let g = self.gamma_a(t)?;
            if g != 0.0 {
                pts.push((t, g.abs().ln()));
            }
        }
        if pts.len() < 2 {
            return Err(Error::Domain("correlation vanishes on the fit window".into()));
        }
        let n = pts.len() as f64;
        let (mt, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
        let sxy: f64 = pts.iter().map(|(t, y)| (t - mt) * (y - my)).sum();
        let sxx: f64 = pts.iter().map(|(t, _)| (t - mt).powi(2)).sum();
        Ok(-sxx / sxy)
    }
}

/// Joint probability `P(s₁,s₂,t)` for two outgoing atoms.
pub fn joint_probability(params: &MaserParams, s1: Spin, s2: Spin, t: f64, dim: usize) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter { name: "t", value: t, reason: "must be >= 0" });
    }
    Ok(AtomCorrelator::new(params, dim)?.joint(s1, s2, t))
}

/// Normalized atomic correlation `γ_A(t)`.
pub fn gamma_a(params: &MaserParams, t: f64, dim: usize) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter { name: "t", value: t, reason: "must be >= 0" });
    }
    AtomCorrelator::new(params, dim)?.gamma_a(t)
}
