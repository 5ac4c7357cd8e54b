//! Phase structure of the micromaser: exact photon statistics, the large-N
//! effective potential and its branches, critical lines, correlation lengths
//! and trapping states.

pub mod correlation;
pub mod distribution;
pub mod error;
pub mod model;
pub mod numerics;
pub mod phase;
pub mod potential;
pub mod trapping;

/// Library version, recorded in sweep output.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use distribution::{stationary_distribution, thermal_distribution, Moments, PhotonDistribution, DEFAULT_TAIL_TOL};
pub use error::{Error, Result};
pub use model::{from_physical, q, theta_eff, theta_eff_sq, w, MaserParams, PhysicalParams};
