//! Parameter points and the single-atom building blocks `q(x)` and `w(x)`.

use crate::error::{Error, Result};
use crate::numerics::{sin_sq_snapped, sinc};

/// A dimensionless micromaser parameter point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaserParams {
    /// Probability that an injected atom is in the excited state.
    pub a: f64,
    /// Mean thermal photon number of the cavity walls.
    pub nb: f64,
    /// Scaled detuning, `Δ² = δ²/N`.
    pub delta: f64,
    /// Pump parameter `θ = gτ√N`.
    pub theta: f64,
    /// Dimensionless flux `N = R/γ`.
    pub flux: f64,
}

impl MaserParams {
    pub fn new(a: f64, nb: f64, delta: f64, theta: f64, flux: f64) -> Result<Self> {
        let p = Self { a, nb, delta, theta, flux };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, name, value, reason| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidParameter { name, value, reason })
            }
        };
        check((0.0..=1.0).contains(&self.a), "a", self.a, "must lie in [0, 1]")?;
        check(self.nb >= 0.0 && self.nb.is_finite(), "nb", self.nb, "must be finite and >= 0")?;
        check(self.delta.is_finite(), "delta", self.delta, "must be finite")?;
        check(self.theta >= 0.0 && self.theta.is_finite(), "theta", self.theta, "must be finite and >= 0")?;
        check(self.flux > 0.0 && self.flux.is_finite(), "flux", self.flux, "must be finite and > 0")
    }

    /// Ground-state probability `1 − a`.
    pub fn b(&self) -> f64 {
        1.0 - self.a
    }

    /// `2a − 1`, the net inversion of the injected atoms.
    pub fn inversion(&self) -> f64 {
        2.0 * self.a - 1.0
    }

    /// The combination `a + n_b(2a − 1)` that scales the potential.
    pub fn potential_scale(&self) -> f64 {
        self.a + self.nb * self.inversion()
    }

    pub fn with_theta(self, theta: f64) -> Self {
        Self { theta, ..self }
    }

    pub fn with_flux(self, flux: f64) -> Self {
        Self { flux, ..self }
    }

    pub fn with_a(self, a: f64) -> Self {
        Self { a, ..self }
    }

    pub fn with_delta(self, delta: f64) -> Self {
        Self { delta, ..self }
    }

    /// `θ_eff²` for this point.
    pub fn theta_eff_sq(&self) -> f64 {
        theta_eff_sq(self.theta, self.delta)
    }
}

/// Dimensional inputs of a micromaser experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// Single-photon Rabi frequency.
    pub g: f64,
    /// Atomic transit time through the cavity.
    pub tau: f64,
    /// Atom-photon frequency detuning.
    pub delta_omega: f64,
    /// Atomic injection rate.
    pub rate: f64,
    /// Cavity decay rate.
    pub gamma: f64,
}

/// Converts dimensional inputs to a [`MaserParams`] point. The atomic
/// preparation `a` and the thermal occupation `nb` are supplied separately.
pub fn from_physical(phys: &PhysicalParams, a: f64, nb: f64) -> Result<MaserParams> {
    for (name, value) in [("g", phys.g), ("tau", phys.tau), ("rate", phys.rate), ("gamma", phys.gamma)] {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::InvalidParameter { name, value, reason: "must be finite and > 0" });
        }
    }
    let flux = phys.rate / phys.gamma;
    let theta = phys.g * phys.tau * flux.sqrt();
    let delta_scaled = phys.delta_omega / (2.0 * phys.g);
    MaserParams::new(a, nb, delta_scaled / flux.sqrt(), theta, flux)
}

/// `θ_eff² = θ² sin²(θΔ)/(θΔ)²`.
pub fn theta_eff_sq(theta: f64, delta: f64) -> f64 {
    let u = theta * delta;
    if u.abs() < 1e-4 {
        let s = sinc(u);
        theta * theta * s * s
    } else {
        sin_sq_snapped(u) / (delta * delta)
    }
}

/// Effective pump parameter `θ_eff ≥ 0`.
pub fn theta_eff(theta: f64, delta: f64) -> f64 {
    theta_eff_sq(theta, delta).sqrt()
}

/// `q(x)/x = θ² sinc²(θ√(x+Δ²))`, finite at `x = 0`.
pub(crate) fn q_over_x(x: f64, theta: f64, delta: f64) -> f64 {
    let r2 = x + delta * delta;
    let u = theta * r2.sqrt();
    if u < 1e-4 {
        let s = sinc(u);
        theta * theta * s * s
    } else {
        sin_sq_snapped(u) / r2
    }
}

/// Emission probability `q(x) = x/(x+Δ²)·sin²(θ√(x+Δ²))`.
pub fn q(x: f64, theta: f64, delta: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("q(x) needs x >= 0, got {x}")));
    }
    Ok(x * q_over_x(x, theta, delta))
}

/// Gain/loss ratio `w(x) = (n_b x + a q)/((1+n_b)x + b q)`, continued to
/// `x = 0` through `q(x)/x → θ_eff²`.
pub fn w(x: f64, params: &MaserParams) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("w(x) needs x >= 0, got {x}")));
    }
    let qx = q_over_x(x, params.theta, params.delta);
    if params.nb == 0.0 && qx == 0.0 {
        return Err(Error::TrappingDegenerate { x });
    }
    Ok(w_from_ratio(qx, params.a, params.nb))
}

#[inline]
pub(crate) fn w_from_ratio(q_over_x: f64, a: f64, nb: f64) -> f64 {
    (nb + a * q_over_x) / (1.0 + nb + (1.0 - a) * q_over_x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn physical_conversion() {
        let p =
            from_physical(&PhysicalParams { g: 1.0, tau: 1.0, delta_omega: 0.0, rate: 100.0, gamma: 1.0 }, 1.0, 0.15)
                .unwrap();
        assert_eq!((p.flux, p.theta, p.delta), (100.0, 10.0, 0.0));
        let p =
            from_physical(&PhysicalParams { g: 1.0, tau: 1.0, delta_omega: 10.0, rate: 100.0, gamma: 1.0 }, 1.0, 0.15)
                .unwrap();
        assert!((p.delta - 0.5).abs() < 1e-15);
        let p =
            from_physical(&PhysicalParams { g: 3.0, tau: 0.2, delta_omega: -6.0, rate: 400.0, gamma: 2.0 }, 1.0, 0.0)
                .unwrap();
        assert!(p.delta < 0.0, "sign of the detuning is kept");
        assert!(from_physical(&PhysicalParams { g: 0.0, tau: 1.0, delta_omega: 0.0, rate: 1.0, gamma: 1.0 }, 1.0, 0.0)
            .is_err());
        assert!(from_physical(
            &PhysicalParams { g: 1.0, tau: 1.0, delta_omega: 0.0, rate: 1.0, gamma: -1.0 },
            1.0,
            0.0
        )
        .is_err());
    }

    #[test]
    fn q_examples() {
        assert!((q(0.25, PI, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(q(1.0, PI, 0.0).unwrap(), 0.0);
        assert_eq!(q(0.0, 2.0, 0.5).unwrap(), 0.0);
        assert!(q(-1e-3, 1.0, 0.0).is_err());
    }

    #[test]
    fn w_examples() {
        let p = MaserParams::new(1.0, 0.15, 0.0, 1.0, 100.0).unwrap();
        let x: f64 = 0.1;
        let qv = (x.sqrt()).sin().powi(2);
        let direct = (0.15 * x + qv) / (1.15 * x);
        assert!((w(x, &p).unwrap() - direct).abs() < 1e-14);
        // x → 0 limit
        assert!((w(0.0, &p).unwrap() - (0.15 + 1.0) / 1.15).abs() < 1e-14);
        let nb = 0.15;
        let eq = MaserParams::new(nb / (1.0 + 2.0 * nb), nb, 0.3, 7.0, 50.0).unwrap();
        for x in [0.0, 0.01, 0.3, 2.0] {
            assert!((w(x, &eq).unwrap() - nb / (1.0 + nb)).abs() < 1e-14);
        }
        let dark = MaserParams::new(1.0, 0.0, 0.0, PI, 100.0).unwrap();
        assert!(matches!(w(1.0, &dark), Err(Error::TrappingDegenerate { .. })));
        assert!(w(-0.5, &p).is_err());
    }

    #[test]
    fn theta_eff_examples() {
        assert_eq!(theta_eff(3.0, 0.0), 3.0);
        assert_eq!(theta_eff(2.0 * PI, 0.5), 0.0);
        let t = PI / 3.0;
        assert!((theta_eff_sq(t, 0.5) - 1.0).abs() < 1e-12);
        // Series and direct branches agree at the switch.
        let below = theta_eff_sq(1.0, 0.99e-4);
        let above = theta_eff_sq(1.0, 1.01e-4);
        assert!((below - above).abs() < 1e-8);
    }

    proptest! {
        #[test]
        fn q_is_bounded(x in 0.0f64..5.0, theta in 0.0f64..40.0, delta in -1.0f64..1.0) {
            let v = q(x, theta, delta).unwrap();
            let cap = if x == 0.0 { 0.0 } else { x / (x + delta * delta) };
            prop_assert!(v >= 0.0);
            prop_assert!(v <= cap.min(1.0) + 1e-15);
        }

        #[test]
        fn w_is_positive_with_thermal_photons(x in 0.0f64..3.0, theta in 0.0f64..30.0, a in 0.0f64..1.0, nb in 0.01f64..2.0) {
            let p = MaserParams::new(a, nb, 0.2, theta, 100.0).unwrap();
            prop_assert!(w(x, &p).unwrap() > 0.0);
        }
    }
}
