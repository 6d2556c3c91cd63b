//! Accuracy of few-level matter truncations for a dipole in an infinite
//! square well coupled to a single cavity mode.
//!
//! Two Hamiltonians are compared: the Coulomb-gauge `p·A` form and the
//! C-field (multipolar-equivalent) `d·D` form. Their lowest transition
//! energy agrees once both matter and photon truncations are converged; the
//! error made by keeping only two or three matter levels differs strongly
//! between them. The crate builds the operators, assembles both
//! Hamiltonians, solves for the lowest gap (dense or iterative), runs the
//! truncation-convergence protocol, and sweeps error maps over the
//! (dipole size, field amplitude) plane.

pub mod constants;
pub mod error;
pub mod hamiltonians;
pub mod operators;
pub mod regimes;
pub mod spectrum;
pub mod sweep;

pub use constants::UnitSystem;
pub use error::{GtbError, Result};
pub use hamiltonians::{
    build_cfield, build_coulomb, coupling_diagnostics, realify, resonant_geometry,
    well_length_for_transition, CouplingDiagnostics, DisplacementConvention, Gauge, ModelParams,
    ResonantGeometry, TensorHamiltonian,
};
pub use operators::{HermitianOperator, MatterBasisSpec, PhotonBasisSpec};
pub use regimes::{
    cyclotron_dipole_size, dipole_size_from_coupling, effective_bohr_radius, load_regimes,
    RegimeEntry,
};
pub use spectrum::{
    converge_fock, converge_gap, eigensolve_symmetric, lowest_gap, relative_error,
    ConvergenceReport, GapResult, SolverConfig,
};
pub use sweep::{
    run_detuned_sweep, run_resonant_sweep, run_sweep, AxisSpec, ErrorMap, SweepConfig, SweepMode,
    SweepPoint,
};
