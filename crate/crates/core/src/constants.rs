//! Natural-unit constants: ħ = c = ε₀ = 1, energies in eV, lengths in eV⁻¹.

use serde::{Deserialize, Serialize};

/// Fine-structure constant (CODATA 2018).
pub const FINE_STRUCTURE: f64 = 0.0072973525693;

/// Electron rest energy in eV.
pub const ELECTRON_MASS_EV: f64 = 510998.95;

/// One eV⁻¹ expressed in micrometres (ħc = 0.197327 eV·μm).
pub const UM_PER_INV_EV: f64 = 0.197327;

/// Elementary charge in Heaviside–Lorentz natural units, √(4πα).
pub fn elementary_charge() -> f64 {
    (4.0 * std::f64::consts::PI * FINE_STRUCTURE).sqrt()
}

/// The unit-system record echoed into every run manifest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitSystem {
    pub hbar: f64,
    pub c: f64,
    pub epsilon0: f64,
    pub electron_mass_ev: f64,
    pub elementary_charge: f64,
    pub fine_structure: f64,
    pub um_per_inv_ev: f64,
}

impl Default for UnitSystem {
    fn default() -> Self {
        Self {
            hbar: 1.0,
            c: 1.0,
            epsilon0: 1.0,
            electron_mass_ev: ELECTRON_MASS_EV,
            elementary_charge: elementary_charge(),
            fine_structure: FINE_STRUCTURE,
            um_per_inv_ev: UM_PER_INV_EV,
        }
    }
}

pub fn inv_ev_to_um(length: f64) -> f64 {
    length * UM_PER_INV_EV
}

pub fn um_to_inv_ev(length_um: f64) -> f64 {
    length_um / UM_PER_INV_EV
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charge_matches_heaviside_lorentz_value() {
        assert!((elementary_charge() - 0.30282212).abs() < 1e-8);
    }

    #[test]
    fn length_conversion_round_trips() {
        let x = 3.7;
        assert!((um_to_inv_ev(inv_ev_to_um(x)) - x).abs() < 1e-15);
    }
}
