//! Lowest-gap extraction and the truncation-convergence protocol.

pub mod dense;
pub mod iterative;
pub mod shift_invert;

use serde::{Deserialize, Serialize};

pub use dense::{eigensolve_symmetric, eigensolve_symmetric_vectors};
pub use iterative::{davidson, lanczos, IterativeOptions, SymmetricOperator};

use crate::error::{GtbError, Result};
use crate::hamiltonians::{build_with, realify, Gauge, Limits, ModelParams, TensorHamiltonian};
use crate::operators::HermitianOperator;

/// Two eigenvalues closer than this (relative to the largest of the lowest
/// three in magnitude) are treated as degenerate.
pub const DEGENERACY_RTOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IterativeMethod {
    #[default]
    Davidson,
    Lanczos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMethod {
    Dense,
    Davidson,
    Lanczos,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Dimensions up to this are diagonalized densely.
    pub dense_threshold: usize,
    pub iterative: IterativeMethod,
    pub residual_rtol: f64,
    pub max_iterations: usize,
    pub limits: Limits,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dense_threshold: 128,
            iterative: IterativeMethod::Davidson,
            residual_rtol: 1e-12,
            max_iterations: 2000,
            limits: Limits::default(),
        }
    }
}

impl SolverConfig {
    pub fn from_env() -> Result<Self> {
        Ok(Self {
            limits: Limits::from_env()?,
            ..Self::default()
        })
    }

    fn iterative_options(&self) -> IterativeOptions {
        IterativeOptions {
            residual_rtol: self.residual_rtol,
            max_iterations: self.max_iterations,
            ..IterativeOptions::default()
        }
    }
}

/// Lowest transition energy of one Hamiltonian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapResult {
    /// `λ₂ − λ₁` of the sorted spectrum; zero when the ground level is degenerate.
    pub gap: f64,
    /// Lowest eigenvalues found (three when the dimension allows).
    pub lowest: Vec<f64>,
    /// `λ₁ = λ₂` within [`DEGENERACY_RTOL`].
    pub ground_degenerate: bool,
    /// `λ₂ = λ₃` within [`DEGENERACY_RTOL`].
    pub excited_degenerate: bool,
    pub method: SolveMethod,
}

impl GapResult {
    pub fn degenerate(&self) -> bool {
        self.ground_degenerate || self.excited_degenerate
    }

    fn from_lowest(lowest: Vec<f64>, method: SolveMethod) -> Result<Self> {
        if lowest.len() < 2 {
            return Err(GtbError::Domain(
                "a gap needs at least two eigenvalues".into(),
            ));
        }
        let scale = lowest.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let close = |a: f64, b: f64| (b - a).abs() <= DEGENERACY_RTOL * scale;
        let ground_degenerate = close(lowest[0], lowest[1]);
        let excited_degenerate = lowest.len() > 2 && close(lowest[1], lowest[2]);
        let gap = if ground_degenerate {
            0.0
        } else {
            lowest[1] - lowest[0]
        };
        Ok(Self {
            gap,
            lowest,
            ground_degenerate,
            excited_degenerate,
            method,
        })
    }
}

fn wanted_levels(dim: usize) -> usize {
    dim.min(3)
}

fn iterative_lowest<Op: SymmetricOperator + ?Sized>(
    op: &Op,
    solver: &SolverConfig,
) -> Result<(Vec<f64>, SolveMethod)> {
    let nev = wanted_levels(op.dim());
    let opts = solver.iterative_options();
    match solver.iterative {
        IterativeMethod::Davidson => Ok((davidson(op, nev, &opts)?.values, SolveMethod::Davidson)),
        IterativeMethod::Lanczos => Ok((lanczos(op, nev, &opts)?.values, SolveMethod::Lanczos)),
    }
}

/// Lowest gap of a builder's output after phase rotation to real form.
///
/// `n_fock` is the photon truncation the operator was built with, needed to
/// place the phases.
pub fn lowest_gap(
    h: &HermitianOperator,
    gauge: Gauge,
    n_fock: usize,
    solver: &SolverConfig,
) -> Result<GapResult> {
    let real = realify(h, gauge, n_fock)?;
    if real.nrows() <= solver.dense_threshold {
        let values = eigensolve_symmetric(&real)?;
        let n = wanted_levels(values.len());
        GapResult::from_lowest(values[..n].to_vec(), SolveMethod::Dense)
    } else {
        let (values, method) = iterative_lowest(&real, solver)?;
        GapResult::from_lowest(values, method)
    }
}

/// Lowest gap for a parameter set, choosing the representation by size:
/// dense build below `dense_threshold`, matrix-free Kronecker form above.
pub fn lowest_gap_for(params: &ModelParams, solver: &SolverConfig) -> Result<GapResult> {
    params.validate()?;
    let dim = params.dim();
    solver.limits.check(dim)?;
    if dim <= solver.dense_threshold.min(solver.limits.dense_cap()) {
        let h = build_with(params, &solver.limits)?;
        lowest_gap(&h, params.gauge, params.photon.n_fock, solver)
    } else {
        let op = TensorHamiltonian::realified(params, &solver.limits)?;
        let (values, method) = iterative_lowest(&op, solver)?;
        GapResult::from_lowest(values, method)
    }
}

/// `|truncated − exact| / exact`.
pub fn relative_error(truncated_gap: f64, exact_gap: f64) -> Result<f64> {
    if !(exact_gap.is_finite() && exact_gap > 0.0) {
        return Err(GtbError::Domain(format!(
            "exact gap must be > 0, got {exact_gap}"
        )));
    }
    Ok((truncated_gap - exact_gap).abs() / exact_gap)
}

/// Truncation schedule for [`converge_gap`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConvergenceConfig {
    pub start_matter: usize,
    pub start_fock: usize,
    pub max_matter: usize,
    pub max_fock: usize,
    /// Geometric growth factor per refinement.
    pub growth: usize,
    pub solver: SolverConfig,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            start_matter: 8,
            start_fock: 16,
            max_matter: 256,
            max_fock: 4096,
            growth: 2,
            solver: SolverConfig::default(),
        }
    }
}

impl ConvergenceConfig {
    fn validate(&self) -> Result<()> {
        if self.growth < 2 {
            return Err(GtbError::Config("growth factor must be >= 2".into()));
        }
        if self.start_matter < 2 || self.start_fock < 2 {
            return Err(GtbError::Config("starting truncations must be >= 2".into()));
        }
        if self.max_matter < self.start_matter || self.max_fock < self.start_fock {
            return Err(GtbError::Config(
                "truncation caps below starting values".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStep {
    pub n_matter: usize,
    pub n_fock: usize,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub gauge: Gauge,
    pub tol: f64,
    /// Gap at the final truncation (eV).
    pub gap: f64,
    pub n_matter_final: usize,
    pub n_fock_final: usize,
    pub history: Vec<ConvergenceStep>,
    pub matter_converged: bool,
    pub fock_converged: bool,
    pub converged: bool,
    /// Degeneracy seen at the final truncation.
    pub ground_degenerate: bool,
    pub excited_degenerate: bool,
}

impl ConvergenceReport {
    pub fn degenerate(&self) -> bool {
        self.ground_degenerate || self.excited_degenerate
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Axis {
    Matter,
    Fock,
}

fn relative_change(old: f64, new: f64) -> f64 {
    let diff = (new - old).abs();
    if diff == 0.0 {
        0.0
    } else {
        diff / new.abs().max(old.abs())
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol <= 1e-2) {
        return Err(GtbError::Domain(format!(
            "convergence tolerance must lie in (0, 1e-2], got {tol}"
        )));
    }
    Ok(())
}

/// Refines `N_m` and `N_p` alternately until the gap stops moving.
///
/// Each axis is frozen once one refinement of it changes the gap by less
/// than `tol` (relative); the run ends when both are frozen or no unfrozen
/// axis can grow further, in which case `converged` is false. A refinement
/// whose solve fails numerically ends the loop the same way.
pub fn converge_gap(
    params: &ModelParams,
    tol: f64,
    config: &ConvergenceConfig,
) -> Result<ConvergenceReport> {
    converge(params, tol, config, true)
}

/// Same protocol with the matter truncation held at `params.matter.n_levels`;
/// only the Fock space is refined.
pub fn converge_fock(
    params: &ModelParams,
    tol: f64,
    config: &ConvergenceConfig,
) -> Result<ConvergenceReport> {
    converge(params, tol, config, false)
}

fn converge(
    params: &ModelParams,
    tol: f64,
    config: &ConvergenceConfig,
    refine_matter: bool,
) -> Result<ConvergenceReport> {
    check_tol(tol)?;
    config.validate()?;
    params.validate()?;
    let limits = config.solver.limits;

    let mut nm = if refine_matter {
        config.start_matter
    } else {
        params.matter.n_levels
    };
    let mut np = config.start_fock;
    let mut current = lowest_gap_for(&params.with_truncation(nm, np), &config.solver)?;
    let mut history = vec![ConvergenceStep {
        n_matter: nm,
        n_fock: np,
        gap: current.gap,
    }];
    let mut matter_done = !refine_matter;
    let mut fock_done = false;
    let mut next = Axis::Matter;

    let grow = |n: usize, cap: usize| (n * config.growth).min(cap);
    loop {
        let can_matter = !matter_done
            && nm < config.max_matter
            && grow(nm, config.max_matter) * np <= limits.max_dim;
        let can_fock =
            !fock_done && np < config.max_fock && nm * grow(np, config.max_fock) <= limits.max_dim;
        let axis = match (next, can_matter, can_fock) {
            (_, false, false) => break,
            (Axis::Matter, true, _) | (Axis::Fock, true, false) => Axis::Matter,
            _ => Axis::Fock,
        };
        let (new_nm, new_np) = match axis {
            Axis::Matter => (grow(nm, config.max_matter), np),
            Axis::Fock => (nm, grow(np, config.max_fock)),
        };
        let refined = match lowest_gap_for(&params.with_truncation(new_nm, new_np), &config.solver)
        {
            Ok(r) => r,
            Err(e @ (GtbError::Numerical(_) | GtbError::Resource { .. })) => {
                log::warn!(
                    "{} gauge: refinement to ({new_nm},{new_np}) failed, stopping: {e}",
                    params.gauge
                );
                break;
            }
            Err(e) => return Err(e),
        };
        let change = relative_change(current.gap, refined.gap);
        log::debug!(
            "{} gauge: ({nm},{np}) -> ({new_nm},{new_np}) gap {:e} change {change:e}",
            params.gauge,
            refined.gap
        );
        if change < tol {
            match axis {
                Axis::Matter => matter_done = true,
                Axis::Fock => fock_done = true,
            }
        }
        nm = new_nm;
        np = new_np;
        current = refined;
        history.push(ConvergenceStep {
            n_matter: nm,
            n_fock: np,
            gap: current.gap,
        });
        next = match axis {
            Axis::Matter => Axis::Fock,
            Axis::Fock => Axis::Matter,
        };
    }

    Ok(ConvergenceReport {
        gauge: params.gauge,
        tol,
        gap: current.gap,
        n_matter_final: nm,
        n_fock_final: np,
        history,
        matter_converged: matter_done && refine_matter,
        fock_converged: fock_done,
        converged: matter_done && fock_done,
        ground_degenerate: current.ground_degenerate,
        excited_degenerate: current.excited_degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::ELECTRON_MASS_EV;
    use crate::hamiltonians::{resonant_geometry, well_length_for_transition};
    use crate::operators::{MatterBasisSpec, PhotonBasisSpec};
    use nalgebra::DMatrix;

    fn resonant(gauge: Gauge, nm: usize, np: usize, f: f64) -> ModelParams {
        let g = resonant_geometry(1e-3, ELECTRON_MASS_EV).unwrap();
        ModelParams::new(
            MatterBasisSpec::electron(nm, g.well_length).unwrap(),
            PhotonBasisSpec::new(np, g.nu, f).unwrap(),
            gauge,
        )
        .unwrap()
    }

    #[test]
    fn trivial_spectra() {
        let id = DMatrix::<f64>::identity(6, 6);
        assert_eq!(eigensolve_symmetric(&id).unwrap(), vec![1.0; 6]);
        let g = 0.75;
        let m = DMatrix::from_row_slice(2, 2, &[0.0, g, g, 0.0]);
        let v = eigensolve_symmetric(&m).unwrap();
        assert!((v[0] + g).abs() < 1e-15 && (v[1] - g).abs() < 1e-15);
    }

    #[test]
    fn non_symmetric_input_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(eigensolve_symmetric(&m), Err(GtbError::Domain(_))));
        let r = DMatrix::<f64>::zeros(2, 3);
        assert!(eigensolve_symmetric(&r).is_err());
    }

    #[test]
    fn vectors_satisfy_eigen_equation() {
        let n = 30;
        let m = DMatrix::from_fn(n, n, |i, j| {
            let (a, b) = (i.min(j) as f64, i.max(j) as f64);
            (a + 1.0).sin() * (b * 0.3).cos() + if i == j { i as f64 } else { 0.0 }
        });
        let (vals, vecs) = eigensolve_symmetric_vectors(&m).unwrap();
        let norm = m.norm();
        for j in [0, 1, n - 1] {
            let v = vecs.column(j);
            let res = (&m * v - v * vals[j]).norm();
            assert!(res <= 1e-9 * norm, "residual {res}");
        }
        let values_only = eigensolve_symmetric(&m).unwrap();
        for (a, b) in vals.iter().zip(&values_only) {
            assert!((a - b).abs() < 1e-12 * norm);
        }
        let ortho = vecs.transpose() * &vecs - DMatrix::identity(n, n);
        assert!(ortho.amax() < 1e-12);
    }

    #[test]
    fn decoupled_resonant_gap_is_mode_energy() {
        for gauge in Gauge::ALL {
            let p = resonant(gauge, 4, 4, 0.0);
            let r = lowest_gap_for(&p, &SolverConfig::default()).unwrap();
            let nu = p.photon.mode_energy;
            assert!((r.gap - nu).abs() <= 1e-12 * nu);
            assert!(r.excited_degenerate && !r.ground_degenerate);
        }
    }

    #[test]
    fn decoupled_detuned_gap_is_transition() {
        let l = well_length_for_transition(1.0, ELECTRON_MASS_EV).unwrap();
        let p = ModelParams::new(
            MatterBasisSpec::electron(4, l).unwrap(),
            PhotonBasisSpec::new(4, 2.0, 0.0).unwrap(),
            Gauge::Coulomb,
        )
        .unwrap();
        let r = lowest_gap_for(&p, &SolverConfig::default()).unwrap();
        assert!((r.gap - 1.0).abs() < 1e-12);
        assert!(!r.degenerate());
    }

    #[test]
    fn relative_error_cases() {
        assert_eq!(relative_error(1.0, 1.0).unwrap(), 0.0);
        assert!((relative_error(0.9, 1.0).unwrap() - 0.1).abs() < 1e-15);
        assert!(matches!(relative_error(1.0, 0.0), Err(GtbError::Domain(_))));
        assert!(relative_error(1.0, -2.0).is_err());
    }

    #[test]
    fn ground_degeneracy_reports_zero_gap() {
        let r = GapResult::from_lowest(vec![1.0, 1.0, 3.0], SolveMethod::Dense).unwrap();
        assert_eq!(r.gap, 0.0);
        assert!(r.ground_degenerate && !r.excited_degenerate);
    }

    #[test]
    fn decoupled_point_converges_at_minimal_dims() {
        let p = resonant(Gauge::CField, 2, 2, 0.0);
        let report = converge_gap(&p, 1e-8, &ConvergenceConfig::default()).unwrap();
        assert!(report.converged);
        assert_eq!(report.history.len(), 3);
        assert_eq!((report.n_matter_final, report.n_fock_final), (16, 32));
        let nu = p.photon.mode_energy;
        assert!((report.gap - nu).abs() <= 1e-12 * nu);
    }

    #[test]
    fn tolerance_domain() {
        let p = resonant(Gauge::CField, 2, 2, 0.0);
        let cfg = ConvergenceConfig::default();
        assert!(converge_gap(&p, 0.0, &cfg).is_err());
        assert!(converge_gap(&p, 0.5, &cfg).is_err());
    }

    #[test]
    fn caps_stop_refinement_without_convergence() {
        let g = resonant_geometry(1e-3, ELECTRON_MASS_EV).unwrap();
        let matter = MatterBasisSpec::electron(2, g.well_length).unwrap();
        let f = crate::hamiltonians::amplitude_for_g_tilde(0.5, &matter).unwrap();
        let p = resonant(Gauge::Coulomb, 2, 2, f);
        let cfg = ConvergenceConfig {
            max_matter: 16,
            max_fock: 32,
            ..ConvergenceConfig::default()
        };
        let report = converge_gap(&p, 1e-10, &cfg).unwrap();
        assert!(!report.converged);
        assert_eq!(report.n_matter_final, 16);
        for w in report.history.windows(2) {
            assert!(
                w[1].n_matter > w[0].n_matter || w[1].n_fock > w[0].n_fock,
                "history must grow"
            );
        }
    }
}
