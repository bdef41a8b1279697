//! Physical constants threaded through every propagator and field operation.

use crate::error::{Error, Result};

/// Reduced Planck constant and particle mass.
///
/// Defaults to natural units (hbar = m = 1), in which all quoted analytic
/// results hold without unit juggling. Both values are configurable for
/// dimensional runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub mass: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            hbar: 1.0,
            mass: 1.0,
        }
    }
}

impl PhysicalConstants {
    pub fn new(hbar: f64, mass: f64) -> Result<Self> {
        if !(hbar > 0.0) || !hbar.is_finite() {
            return Err(Error::InvalidParameter {
                name: "hbar",
                reason: format!("must be finite and positive, got {hbar}"),
            });
        }
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::InvalidParameter {
                name: "mass",
                reason: format!("must be finite and positive, got {mass}"),
            });
        }
        Ok(Self { hbar, mass })
    }

    /// hbar = m = 1.
    pub fn natural() -> Self {
        Self::default()
    }
}
