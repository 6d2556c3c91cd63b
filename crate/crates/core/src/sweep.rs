//! Grids of relative truncation errors over (η or ν, f).
//!
//! Each grid point is an independent work item. The exact gap comes from the
//! two-axis convergence loop in the reference gauge; truncated gaps hold the
//! matter space at 2 or 3 levels and converge only the Fock space.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;

use crate::constants::ELECTRON_MASS_EV;
use crate::error::{GtbError, Result};
use crate::hamiltonians::{
    coupling_diagnostics, resonant_geometry, transition_dipole_length, well_length_for_transition,
    CouplingDiagnostics, DisplacementConvention, Gauge, ModelParams,
};
use crate::operators::{MatterBasisSpec, PhotonBasisSpec};
use crate::spectrum::{
    converge_fock, converge_gap, relative_error, ConvergenceConfig, ConvergenceReport,
};

/// Matter truncations a sweep may report.
pub const SUPPORTED_LEVELS: [usize; 2] = [2, 3];

/// Excess of `err(g, 3)` over `err(g, 2)` that is logged as a violation.
pub const MONOTONE_SLACK: f64 = 1e-12;

pub const CSV_HEADER: [&str; 13] = [
    "mode",
    "eta",
    "nu_eV",
    "f_eV",
    "g_tilde",
    "gap_exact_eV",
    "err_coulomb_2",
    "err_coulomb_3",
    "err_cfield_2",
    "err_cfield_3",
    "Nm_star",
    "Np_star",
    "converged",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    /// Mode locked to the lowest transition; η swept.
    Resonant,
    /// Lowest transition held at `fixed_omega10`; ν swept.
    Detuned,
}

impl SweepMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepMode::Resonant => "resonant",
            SweepMode::Detuned => "detuned",
        }
    }
}

impl std::fmt::Display for SweepMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SweepMode {
    type Err = GtbError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "resonant" => Ok(SweepMode::Resonant),
            "detuned" => Ok(SweepMode::Detuned),
            other => Err(GtbError::Config(format!("unknown sweep mode `{other}`"))),
        }
    }
}

/// One grid axis: log-spaced or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisSpec {
    Log { min: f64, max: f64, count: usize },
    Values(Vec<f64>),
}

impl AxisSpec {
    pub fn log(min: f64, max: f64, count: usize) -> Self {
        AxisSpec::Log { min, max, count }
    }

    /// `allow_zero` admits zero entries in explicit lists (the decoupled f column).
    fn validate(&self, name: &str, allow_zero: bool) -> Result<()> {
        match self {
            AxisSpec::Log { min, max, count } => {
                if *count < 2 {
                    return Err(GtbError::Config(format!("{name}: grid count must be >= 2")));
                }
                if !(min.is_finite() && max.is_finite() && *min > 0.0 && min < max) {
                    return Err(GtbError::Config(format!(
                        "{name}: need 0 < min < max, got [{min}, {max}]"
                    )));
                }
            }
            AxisSpec::Values(v) => {
                if v.is_empty() {
                    return Err(GtbError::Config(format!("{name}: value list is empty")));
                }
                let ok = |x: f64| x.is_finite() && (x > 0.0 || (allow_zero && x == 0.0));
                if let Some(bad) = v.iter().find(|x| !ok(**x)) {
                    return Err(GtbError::Config(format!("{name}: invalid value {bad}")));
                }
            }
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            AxisSpec::Log { min, max, count } => {
                let (a, b) = (min.ln(), max.ln());
                let step = (b - a) / (*count - 1) as f64;
                (0..*count)
                    .map(|i| match i {
                        0 => *min,
                        i if i == count - 1 => *max,
                        i => (a + step * i as f64).exp(),
                    })
                    .collect()
            }
            AxisSpec::Values(v) => v.clone(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            AxisSpec::Log { count, .. } => *count,
            AxisSpec::Values(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub mode: SweepMode,
    /// η grid (resonant mode).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_axis: Option<AxisSpec>,
    /// ν grid in eV (detuned mode).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu_axis: Option<AxisSpec>,
    /// Field amplitude grid in eV.
    pub f_axis: AxisSpec,
    pub levels: Vec<usize>,
    pub gauges: Vec<Gauge>,
    pub tol: f64,
    /// Lowest transition in eV (detuned mode).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_omega10: Option<f64>,
    /// Worker threads; 0 picks the machine default. Does not affect output.
    #[serde(default)]
    pub parallelism: usize,
    /// Gauge whose converged gap is the exact reference.
    #[serde(default = "default_reference")]
    pub reference_gauge: Gauge,
    #[serde(default)]
    pub displacement: DisplacementConvention,
    #[serde(default)]
    pub convergence: ConvergenceConfig,
}

fn default_reference() -> Gauge {
    Gauge::CField
}

pub const DEFAULT_GRID_COUNT: usize = 24;
pub const DEFAULT_ETA_RANGE: (f64, f64) = (1e-4, 1e-1);
pub const DEFAULT_F_RANGE: (f64, f64) = (1e-2, 1e4);
pub const DEFAULT_SWEEP_TOL: f64 = 1e-8;

impl SweepConfig {
    /// Full default resonant grid.
    pub fn resonant_default() -> Self {
        Self {
            mode: SweepMode::Resonant,
            eta_axis: Some(AxisSpec::log(
                DEFAULT_ETA_RANGE.0,
                DEFAULT_ETA_RANGE.1,
                DEFAULT_GRID_COUNT,
            )),
            nu_axis: None,
            f_axis: AxisSpec::log(DEFAULT_F_RANGE.0, DEFAULT_F_RANGE.1, DEFAULT_GRID_COUNT),
            levels: SUPPORTED_LEVELS.to_vec(),
            gauges: Gauge::ALL.to_vec(),
            tol: DEFAULT_SWEEP_TOL,
            fixed_omega10: None,
            parallelism: 0,
            reference_gauge: Gauge::CField,
            displacement: DisplacementConvention::ModeScaled,
            convergence: ConvergenceConfig::default(),
        }
    }

    /// Default detuned grid: ν over two decades around `omega10`.
    pub fn detuned_default(omega10: f64) -> Self {
        Self {
            mode: SweepMode::Detuned,
            eta_axis: None,
            nu_axis: Some(AxisSpec::log(
                0.1 * omega10,
                10.0 * omega10,
                DEFAULT_GRID_COUNT,
            )),
            fixed_omega10: Some(omega10),
            ..Self::resonant_default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            SweepMode::Resonant => {
                let axis = self
                    .eta_axis
                    .as_ref()
                    .ok_or_else(|| GtbError::Config("resonant sweep needs an eta axis".into()))?;
                axis.validate("eta axis", false)?;
            }
            SweepMode::Detuned => {
                let axis = self
                    .nu_axis
                    .as_ref()
                    .ok_or_else(|| GtbError::Config("detuned sweep needs a nu axis".into()))?;
                axis.validate("nu axis", false)?;
                match self.fixed_omega10 {
                    Some(w) if w.is_finite() && w > 0.0 => {}
                    other => {
                        return Err(GtbError::Config(format!(
                            "detuned sweep needs fixed_omega10 > 0, got {other:?}"
                        )))
                    }
                }
            }
        }
        self.f_axis.validate("f axis", true)?;
        if self.levels.is_empty() || self.levels.iter().any(|l| !SUPPORTED_LEVELS.contains(l)) {
            return Err(GtbError::Config(format!(
                "levels must be a non-empty subset of {SUPPORTED_LEVELS:?}, got {:?}",
                self.levels
            )));
        }
        if self.gauges.is_empty() {
            return Err(GtbError::Config("at least one gauge is required".into()));
        }
        if !(self.tol > 0.0 && self.tol <= 1e-2) {
            return Err(GtbError::Config(format!(
                "tol must lie in (0, 1e-2], got {}",
                self.tol
            )));
        }
        Ok(())
    }

    /// Sorted, deduplicated levels and gauges.
    fn combinations(&self) -> Vec<(Gauge, usize)> {
        let mut gauges = self.gauges.clone();
        gauges.sort();
        gauges.dedup();
        let mut levels = self.levels.clone();
        levels.sort_unstable();
        levels.dedup();
        gauges
            .iter()
            .flat_map(|g| levels.iter().map(move |l| (*g, *l)))
            .collect()
    }

    fn outer_axis(&self) -> &AxisSpec {
        match self.mode {
            SweepMode::Resonant => self.eta_axis.as_ref().expect("validated"),
            SweepMode::Detuned => self.nu_axis.as_ref().expect("validated"),
        }
    }

    pub fn point_count(&self) -> usize {
        self.outer_axis().len() * self.f_axis.len()
    }
}

/// Truncated-gap result for one (gauge, levels) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationError {
    pub gauge: Gauge,
    pub levels: usize,
    /// `|ΔE_trunc − ΔE_exact| / ΔE_exact`.
    pub error: f64,
    pub gap_ev: f64,
    /// Fock truncation reached at fixed `levels`.
    pub n_fock: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub mode: SweepMode,
    pub eta: f64,
    #[serde(rename = "nu_eV")]
    pub nu_ev: f64,
    #[serde(rename = "f_eV")]
    pub f_ev: f64,
    pub g_tilde: f64,
    #[serde(rename = "gap_exact_eV")]
    pub gap_exact_ev: f64,
    pub errors: Vec<TruncationError>,
    #[serde(rename = "Nm_star")]
    pub nm_star: usize,
    #[serde(rename = "Np_star")]
    pub np_star: usize,
    /// Exact gap and every truncated gap converged.
    pub converged: bool,
    /// Degeneracy among the lowest three levels of the exact spectrum.
    pub degenerate: bool,
}

impl SweepPoint {
    pub fn error(&self, gauge: Gauge, levels: usize) -> Option<f64> {
        self.errors
            .iter()
            .find(|e| e.gauge == gauge && e.levels == levels)
            .map(|e| e.error)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorMap {
    pub config: SweepConfig,
    /// Row-major over (outer axis, f).
    pub points: Vec<SweepPoint>,
}

/// A point where adding a matter level made the error worse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotoneViolation {
    pub index: usize,
    pub gauge: Gauge,
    pub excess: f64,
}

impl ErrorMap {
    /// `err(g, 3) − err(g, 2)` wherever it exceeds [`MONOTONE_SLACK`] at a
    /// converged point.
    pub fn monotonicity_violations(&self) -> Vec<MonotoneViolation> {
        let mut out = Vec::new();
        for (index, p) in self.points.iter().enumerate() {
            if !p.converged {
                continue;
            }
            for gauge in Gauge::ALL {
                if let (Some(e2), Some(e3)) = (p.error(gauge, 2), p.error(gauge, 3)) {
                    if e3 > e2 + MONOTONE_SLACK {
                        out.push(MonotoneViolation {
                            index,
                            gauge,
                            excess: e3 - e2,
                        });
                    }
                }
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(CSV_HEADER)?;
        let num = |v: f64| format!("{v:e}");
        for p in &self.points {
            let err = |g, l| p.error(g, l).map(num).unwrap_or_default();
            out.write_record([
                p.mode.as_str().to_string(),
                num(p.eta),
                num(p.nu_ev),
                num(p.f_ev),
                num(p.g_tilde),
                num(p.gap_exact_ev),
                err(Gauge::Coulomb, 2),
                err(Gauge::Coulomb, 3),
                err(Gauge::CField, 2),
                err(Gauge::CField, 3),
                p.nm_star.to_string(),
                p.np_star.to_string(),
                p.converged.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| GtbError::Serialization(e.to_string()))
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Physical setup of one grid point, before any diagonalization.
#[derive(Debug, Clone, Copy, PartialEq)]
struct PointGeometry {
    nu: f64,
    well_length: f64,
    f: f64,
}

fn point_params(geom: PointGeometry, config: &SweepConfig, gauge: Gauge) -> Result<ModelParams> {
    let mut p = ModelParams::new(
        MatterBasisSpec::electron(2, geom.well_length)?,
        PhotonBasisSpec::new(2, geom.nu, geom.f)?,
        gauge,
    )?;
    p.displacement = config.displacement;
    Ok(p)
}

/// Everything computed at one grid point, including convergence histories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointDetail {
    pub point: SweepPoint,
    pub diagnostics: CouplingDiagnostics,
    /// Two-axis convergence in the reference gauge.
    pub exact: ConvergenceReport,
    /// Fock-only convergence per (gauge, levels), in the order of `point.errors`.
    pub truncated: Vec<ConvergenceReport>,
}

/// Evaluates one grid point at mode energy `nu` and well length `well_length`.
pub fn evaluate_point_detailed(
    config: &SweepConfig,
    nu: f64,
    well_length: f64,
    f: f64,
) -> Result<PointDetail> {
    let geom = PointGeometry { nu, well_length, f };
    let reference = point_params(geom, config, config.reference_gauge)?;
    let diagnostics = coupling_diagnostics(&reference)?;
    let exact = converge_gap(&reference, config.tol, &config.convergence)?;
    if exact.gap.is_nan() || exact.gap <= 0.0 {
        return Err(GtbError::Numerical(format!(
            "exact gap is {} at nu={nu:e}, f={f:e}; the ground level is degenerate",
            exact.gap
        )));
    }
    let mut converged = exact.converged;
    let mut errors = Vec::new();
    let mut truncated = Vec::new();
    for (gauge, levels) in config.combinations() {
        let p = point_params(geom, config, gauge)?.with_truncation(levels, 2);
        let report = converge_fock(&p, config.tol, &config.convergence)?;
        converged &= report.converged;
        errors.push(TruncationError {
            gauge,
            levels,
            error: relative_error(report.gap, exact.gap)?,
            gap_ev: report.gap,
            n_fock: report.n_fock_final,
            converged: report.converged,
        });
        truncated.push(report);
    }
    if !converged {
        log::warn!(
            "point nu={nu:e} eV f={f:e} eV did not converge to tol {:e}",
            config.tol
        );
    }
    let point = SweepPoint {
        mode: config.mode,
        eta: diagnostics.eta,
        nu_ev: nu,
        f_ev: f,
        g_tilde: diagnostics.g_tilde,
        gap_exact_ev: exact.gap,
        errors,
        nm_star: exact.n_matter_final,
        np_star: exact.n_fock_final,
        converged,
        degenerate: exact.degenerate(),
    };
    Ok(PointDetail {
        point,
        diagnostics,
        exact,
        truncated,
    })
}

pub fn evaluate_point(
    config: &SweepConfig,
    nu: f64,
    well_length: f64,
    f: f64,
) -> Result<SweepPoint> {
    Ok(evaluate_point_detailed(config, nu, well_length, f)?.point)
}

/// `(ν, L)` for a value of the outer axis (η when resonant, ν when detuned).
pub fn point_geometry(config: &SweepConfig, outer: f64) -> Result<(f64, f64)> {
    geometry_for(config, outer)
}

fn geometry_for(config: &SweepConfig, outer: f64) -> Result<(f64, f64)> {
    match config.mode {
        SweepMode::Resonant => {
            let g = resonant_geometry(outer, ELECTRON_MASS_EV)?;
            Ok((g.nu, g.well_length))
        }
        SweepMode::Detuned => {
            let w = config.fixed_omega10.expect("validated");
            Ok((outer, well_length_for_transition(w, ELECTRON_MASS_EV)?))
        }
    }
}

fn run(config: &SweepConfig) -> Result<ErrorMap> {
    config.validate()?;
    let outer = config.outer_axis().values();
    let fs = config.f_axis.values();
    let grid: Vec<(f64, f64)> = outer
        .iter()
        .flat_map(|o| fs.iter().map(move |f| (*o, *f)))
        .collect();
    log::info!(
        "{} sweep: {} points, {} worker(s)",
        config.mode,
        grid.len(),
        if config.parallelism == 0 {
            "auto".to_string()
        } else {
            config.parallelism.to_string()
        }
    );
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .map_err(|e| GtbError::Config(format!("cannot start worker pool: {e}")))?;
    let done = std::sync::atomic::AtomicUsize::new(0);
    let total = grid.len();
    let points = pool.install(|| {
        grid.par_iter()
            .map(|&(o, f)| {
                let (nu, l) = geometry_for(config, o)?;
                let point = evaluate_point(config, nu, l, f)?;
                let n = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
                log::info!("[{n}/{total}] nu={nu:e} f={f:e} g~={:.4e}", point.g_tilde);
                Ok(point)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let map = ErrorMap {
        config: config.clone(),
        points,
    };
    for v in map.monotonicity_violations() {
        log::warn!(
            "point {}: {} error grew by {:e} going from 2 to 3 levels",
            v.index,
            v.gauge,
            v.excess
        );
    }
    Ok(map)
}

pub fn run_resonant_sweep(config: &SweepConfig) -> Result<ErrorMap> {
    if config.mode != SweepMode::Resonant {
        return Err(GtbError::Config(
            "run_resonant_sweep needs mode = resonant".into(),
        ));
    }
    run(config)
}

pub fn run_detuned_sweep(config: &SweepConfig) -> Result<ErrorMap> {
    if config.mode != SweepMode::Detuned {
        return Err(GtbError::Config(
            "run_detuned_sweep needs mode = detuned".into(),
        ));
    }
    run(config)
}

pub fn run_sweep(config: &SweepConfig) -> Result<ErrorMap> {
    match config.mode {
        SweepMode::Resonant => run_resonant_sweep(config),
        SweepMode::Detuned => run_detuned_sweep(config),
    }
}

/// η at which the resonant mode energy equals `nu`.
pub fn eta_for_resonant_nu(nu: f64) -> Result<f64> {
    let l = well_length_for_transition(nu, ELECTRON_MASS_EV)?;
    Ok(transition_dipole_length(l) * nu / (2.0 * PI))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(mode: SweepMode) -> SweepConfig {
        let mut c = match mode {
            SweepMode::Resonant => SweepConfig::resonant_default(),
            SweepMode::Detuned => SweepConfig::detuned_default(1.0),
        };
        c.eta_axis = c.eta_axis.map(|_| AxisSpec::log(1e-3, 2e-3, 2));
        c.nu_axis = c.nu_axis.map(|_| AxisSpec::log(0.5, 1.0, 2));
        c.f_axis = AxisSpec::Values(vec![0.0, 1e-2]);
        c.tol = 1e-6;
        c
    }

    #[test]
    fn log_axis_hits_endpoints() {
        let v = AxisSpec::log(1e-4, 1e-1, 4).values();
        assert_eq!(v.len(), 4);
        assert_eq!(v[0], 1e-4);
        assert_eq!(v[3], 1e-1);
        assert!((v[1] - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        let mut c = SweepConfig::resonant_default();
        assert!(c.validate().is_ok());
        c.levels = vec![4];
        assert!(c.validate().is_err());
        let mut c = SweepConfig::resonant_default();
        c.f_axis = AxisSpec::log(1.0, 1.0, 3);
        assert!(c.validate().is_err());
        c.f_axis = AxisSpec::log(1.0, 2.0, 1);
        assert!(c.validate().is_err());
        let mut c = SweepConfig::detuned_default(1.0);
        c.fixed_omega10 = None;
        assert!(c.validate().is_err());
        let mut c = SweepConfig::resonant_default();
        c.eta_axis = None;
        assert!(c.validate().is_err());
        assert!(run_detuned_sweep(&SweepConfig::resonant_default()).is_err());
    }

    #[test]
    fn decoupled_column_has_zero_error() {
        for mode in [SweepMode::Resonant, SweepMode::Detuned] {
            let map = run_sweep(&small(mode)).unwrap();
            assert_eq!(map.points.len(), 4);
            for p in map.points.iter().filter(|p| p.f_ev == 0.0) {
                assert_eq!(p.errors.len(), 4);
                assert!(p.errors.iter().all(|e| e.error == 0.0), "{p:?}");
            }
        }
    }

    #[test]
    fn csv_schema_and_missing_fields() {
        let mut c = small(SweepMode::Resonant);
        c.gauges = vec![Gauge::CField];
        c.levels = vec![2];
        let map = run_sweep(&c).unwrap();
        let text = map.to_csv_string().unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 13);
        assert_eq!(row[0], "resonant");
        assert_eq!(row[6], "");
        assert_eq!(row[7], "");
        assert!(!row[8].is_empty());
        assert_eq!(row[9], "");
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn eta_for_nu_inverts_geometry() {
        let eta = eta_for_resonant_nu(1.0).unwrap();
        let g = resonant_geometry(eta, ELECTRON_MASS_EV).unwrap();
        assert!((g.nu - 1.0).abs() < 1e-12);
    }
}
