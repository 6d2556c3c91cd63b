#![allow(dead_code)]

pub mod oracles;

use gtb_core::hamiltonians::amplitude_for_g_tilde;
use gtb_core::{resonant_geometry, Gauge, MatterBasisSpec, ModelParams, PhotonBasisSpec};

pub const ETA: f64 = 1e-3;

/// Resonant parameters at η = 1e-3 with coupling `g_tilde`.
pub fn resonant(g_tilde: f64, n_levels: usize, n_fock: usize, gauge: Gauge) -> ModelParams {
    let geo = resonant_geometry(ETA, gtb_core::constants::ELECTRON_MASS_EV).unwrap();
    let matter = MatterBasisSpec::electron(n_levels, geo.well_length).unwrap();
    let f = amplitude_for_g_tilde(g_tilde, &matter).unwrap();
    let photon = PhotonBasisSpec::new(n_fock, geo.nu, f).unwrap();
    ModelParams::new(matter, photon, gauge).unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
