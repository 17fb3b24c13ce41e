//! Model constants in trap units.
//!
//! Lengths are measured in `a0 = (m w0)^{-1/2}`, times in `T0 / 2pi` and
//! energies in `hbar w0`, so `hbar = m = w0 = a0 = 1` internally. The quarter
//! trap period `T0 / 4` is the dimensionless time `pi / 2`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// `T0 / 4` in internal time units.
pub const QUARTER_PERIOD: f64 = std::f64::consts::FRAC_PI_2;

/// Atom number used when a scenario only fixes the products `g1D N` and `kappa / N^2`.
pub const DEFAULT_ATOM_NUMBER: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Atom number estimate `N`.
    pub n_atoms: f64,
    /// 1D coupling constant, units `hbar w0 a0`.
    pub g1d: f64,
    /// Measurement strength `kappa / N^2`, units `w0 / a0^2`. Zero means a closed system.
    pub kappa_tilde: f64,
    pub omega0: f64,
    pub mass: f64,
}

impl PhysicalParams {
    pub fn new(n_atoms: f64, g1d: f64, kappa_tilde: f64) -> Result<Self> {
        let params = Self { n_atoms, g1d, kappa_tilde, omega0: 1.0, mass: 1.0 };
        params.validate()?;
        Ok(params)
    }

    /// Builds parameters from the reported combination `g1D N` at atom number `n_atoms`.
    pub fn from_interaction_strength(n_atoms: f64, g1d_n: f64, kappa_tilde: f64) -> Result<Self> {
        if !(n_atoms > 0.0) {
            return Err(invalid("n_atoms", format!("must be positive, got {n_atoms}")));
        }
        Self::new(n_atoms, g1d_n / n_atoms, kappa_tilde)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n_atoms > 0.0) || !self.n_atoms.is_finite() {
            return Err(invalid("n_atoms", format!("must be positive, got {}", self.n_atoms)));
        }
        if !(self.g1d >= 0.0) || !self.g1d.is_finite() {
            return Err(invalid(
                "g1d",
                format!("only repulsive (g1d >= 0) interactions are supported, got {}", self.g1d),
            ));
        }
        if !(self.kappa_tilde >= 0.0) || !self.kappa_tilde.is_finite() {
            return Err(invalid("kappa_tilde", format!("must be nonnegative, got {}", self.kappa_tilde)));
        }
        if self.omega0 != 1.0 || self.mass != 1.0 {
            return Err(invalid("omega0/mass", "internal units fix m = w0 = 1"));
        }
        Ok(())
    }

    /// The reported interaction strength `g1D N`.
    pub fn interaction_strength(&self) -> f64 {
        self.g1d * self.n_atoms
    }

    /// The raw measurement constant `kappa = kappa_tilde N^2`.
    pub fn kappa(&self) -> f64 {
        self.kappa_tilde * self.n_atoms * self.n_atoms
    }

    pub fn with_kappa_tilde(mut self, kappa_tilde: f64) -> Self {
        self.kappa_tilde = kappa_tilde;
        self
    }
}

/// Quasi-1D coupling `g1D = 2 a_s w_perp` from the s-wave scattering length (units `a0`)
/// and the radial trap frequency (units `w0`).
pub fn g1d_from_scattering(a_s: f64, omega_perp: f64) -> Result<f64> {
    if !(omega_perp > 0.0) {
        return Err(invalid("omega_perp", format!("radial frequency must be positive, got {omega_perp}")));
    }
    Ok(2.0 * a_s * omega_perp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coupling_from_scattering_length() {
        assert_eq!(g1d_from_scattering(0.0, 10.0).unwrap(), 0.0);
        assert!((g1d_from_scattering(0.5, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((g1d_from_scattering(0.01, 500.0).unwrap() - 10.0).abs() < 1e-12);
        assert!(g1d_from_scattering(0.1, 0.0).is_err());
        assert!(g1d_from_scattering(0.1, -2.0).is_err());
    }

    #[test]
    fn rejects_attractive_and_negative_measurement() {
        assert!(PhysicalParams::new(100.0, -0.1, 0.0).is_err());
        assert!(PhysicalParams::new(100.0, 0.1, -1.0).is_err());
        assert!(PhysicalParams::new(0.0, 0.1, 1.0).is_err());
    }

    #[test]
    fn interaction_strength_round_trips() {
        let p = PhysicalParams::from_interaction_strength(250.0, 10.0, 5.0).unwrap();
        assert!((p.interaction_strength() - 10.0).abs() < 1e-12);
        assert!((p.kappa() - 5.0 * 250.0 * 250.0).abs() < 1e-6);
    }
}
