//! `gtb`: truncation-error runs for the Coulomb and C-field cavity Hamiltonians.
//!
//! Subcommands: `point`, `sweep`, `converge`, `overlay`. Every output file
//! gets a `<file>.manifest.json` next to it that reproduces the run via
//! `--config`. Logs go to standard error.
//!
//! Exit codes: 0 success (including unconverged-but-reported results),
//! 2 usage, 3 I/O, 4 numerical failure.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use gtb_core::hamiltonians::{amplitude_for_g_tilde, Limits, MAX_DIM_ENV};
use gtb_core::regimes::{load_regimes, overlay_rows, write_overlay, LengthUnit};
use gtb_core::spectrum::{converge_fock, converge_gap, ConvergenceReport};
use gtb_core::sweep::{eta_for_resonant_nu, evaluate_point_detailed, point_geometry, PointDetail};
use gtb_core::{
    coupling_diagnostics, run_sweep, AxisSpec, CouplingDiagnostics, DisplacementConvention, Gauge,
    GtbError, MatterBasisSpec, ModelParams, PhotonBasisSpec, SweepConfig, SweepMode, UnitSystem,
};

const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "gtb",
    version,
    about = "Few-level truncation errors in cavity QED gauges"
)]
struct Cli {
    /// Only warnings and errors on standard error.
    #[arg(short, long, global = true)]
    quiet: bool,

    /// Debug-level logging.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact and truncated gaps with errors at one parameter point (JSON).
    Point(PointArgs),
    /// Error map over a grid, written as CSV (plus optional JSON).
    Sweep(SweepArgs),
    /// Convergence history of the lowest gap in one gauge (JSON).
    Converge(ConvergeArgs),
    /// Experimental regimes in sweep-axis coordinates (CSV).
    Overlay(OverlayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Resonant,
    Detuned,
}

impl From<ModeArg> for SweepMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Resonant => SweepMode::Resonant,
            ModeArg::Detuned => SweepMode::Detuned,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum UnitArg {
    /// Natural units (eV⁻¹).
    Natural,
    Um,
}

/// Where the physical point sits; shared by `point` and `converge`.
#[derive(Debug, Clone, Args)]
struct GeometryArgs {
    /// Dipole size over wavelength (resonant mode).
    #[arg(long)]
    eta: Option<f64>,

    /// Mode energy in eV (detuned mode, or resonant with η derived).
    #[arg(long)]
    nu: Option<f64>,

    /// Field amplitude in eV.
    #[arg(long, conflicts_with = "gtilde")]
    f: Option<f64>,

    /// Normalized coupling g/ω₁₀; f is solved from g̃ = e|x₁₂|f.
    #[arg(long)]
    gtilde: Option<f64>,

    /// Resonant geometry (the default when --eta is given).
    #[arg(long, conflicts_with = "mode")]
    resonant: bool,

    #[arg(long, value_enum)]
    mode: Option<ModeArg>,

    /// Lowest transition in eV (detuned mode).
    #[arg(long = "omega10-ev")]
    omega10_ev: Option<f64>,

    /// Relative convergence tolerance.
    #[arg(long)]
    tol: Option<f64>,

    /// Use the displacement field without the mode-energy factor.
    #[arg(long = "literal-eq38")]
    literal: bool,
}

#[derive(Debug, Args)]
struct PointArgs {
    #[command(flatten)]
    geometry: GeometryArgs,

    /// Matter truncations to report.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<usize>>,

    #[arg(long, value_delimiter = ',')]
    gauges: Option<Vec<Gauge>>,

    /// Point config (JSON or TOML) or a manifest from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Write the report here (plus a manifest) instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ConvergeArgs {
    #[command(flatten)]
    geometry: GeometryArgs,

    #[arg(long, default_value = "cfield")]
    gauge: Gauge,

    /// Hold the matter truncation at this many levels and converge only N_p.
    #[arg(long)]
    levels: Option<usize>,

    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,

    #[arg(long = "eta-min")]
    eta_min: Option<f64>,
    #[arg(long = "eta-max")]
    eta_max: Option<f64>,
    #[arg(long = "eta-count")]
    eta_count: Option<usize>,
    /// Explicit η values, overriding the log grid.
    #[arg(long = "eta-values", value_delimiter = ',')]
    eta_values: Option<Vec<f64>>,

    #[arg(long = "nu-min")]
    nu_min: Option<f64>,
    #[arg(long = "nu-max")]
    nu_max: Option<f64>,
    #[arg(long = "nu-count")]
    nu_count: Option<usize>,
    #[arg(long = "nu-values", value_delimiter = ',')]
    nu_values: Option<Vec<f64>>,

    #[arg(long = "f-min")]
    f_min: Option<f64>,
    #[arg(long = "f-max")]
    f_max: Option<f64>,
    #[arg(long = "f-count")]
    f_count: Option<usize>,
    /// Explicit f values in eV (zero allowed).
    #[arg(long = "f-values", value_delimiter = ',')]
    f_values: Option<Vec<f64>>,

    #[arg(long = "omega10-ev")]
    omega10_ev: Option<f64>,

    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<usize>>,

    #[arg(long, value_delimiter = ',')]
    gauges: Option<Vec<Gauge>>,

    #[arg(long)]
    tol: Option<f64>,

    /// Worker threads; 0 = automatic. Output does not depend on it.
    #[arg(long)]
    parallel: Option<usize>,

    /// Use the displacement field without the mode-energy factor.
    #[arg(long = "literal-eq38")]
    literal: bool,

    /// Sweep config (JSON or TOML) or a manifest from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,

    /// CSV output path.
    #[arg(long, default_value = "sweep.csv")]
    out: PathBuf,

    /// Also write the JSON mirror next to the CSV.
    #[arg(long)]
    json: bool,

    /// Write the CSV to standard output instead of a file.
    #[arg(long)]
    stdout: bool,
}

#[derive(Debug, Args)]
struct OverlayArgs {
    /// Regime table; the bundled one when omitted.
    #[arg(long)]
    regimes: Option<PathBuf>,

    /// Length unit for dipole sizes.
    #[arg(long, value_enum, default_value = "natural")]
    units: UnitArg,

    #[arg(long, default_value = "overlay.csv")]
    out: PathBuf,

    #[arg(long)]
    stdout: bool,
}

/// Fully resolved single-point parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PointConfig {
    mode: SweepMode,
    /// η for resonant points, ν (eV) for detuned ones.
    outer: f64,
    f_ev: f64,
    /// The requested g̃ when f was solved from it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    g_tilde_requested: Option<f64>,
    /// The single-point sweep configuration the point is evaluated with.
    sweep: SweepConfig,
}

#[derive(Debug, Serialize, Deserialize)]
struct RunManifest {
    command: String,
    config: serde_json::Value,
    constants: UnitSystem,
    artifact_version: String,
    output_paths: Vec<String>,
}

#[derive(Debug, Serialize)]
struct PointReport<'a> {
    config: &'a PointConfig,
    diagnostics: &'a CouplingDiagnostics,
    x10_um: f64,
    gap_exact_ev: f64,
    converged: bool,
    degenerate: bool,
    ground_degenerate: bool,
    excited_degenerate: bool,
    truncated: Vec<TruncatedReport<'a>>,
    exact: &'a ConvergenceReport,
}

#[derive(Debug, Serialize)]
struct TruncatedReport<'a> {
    gauge: Gauge,
    levels: usize,
    gap_ev: f64,
    error: f64,
    convergence: &'a ConvergenceReport,
}

#[derive(Debug, Serialize)]
struct ConvergeReport<'a> {
    mode: SweepMode,
    nu_ev: f64,
    well_length: f64,
    f_ev: f64,
    diagnostics: CouplingDiagnostics,
    fixed_levels: Option<usize>,
    report: &'a ConvergenceReport,
}

/// Failure with the exit code it maps to.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<GtbError> for Failure {
    fn from(e: GtbError) -> Self {
        let code = match e {
            GtbError::Config(_) | GtbError::Domain(_) | GtbError::Parse { .. } => EXIT_USAGE,
            GtbError::Io(_) | GtbError::Serialization(_) => EXIT_IO,
            GtbError::Resource { .. }
            | GtbError::Numerical(_)
            | GtbError::InternalConsistency(_) => EXIT_NUMERICAL,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: EXIT_IO,
        message: format!("{}: {e}", path.display()),
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet {
        "warn"
    } else if cli.verbose {
        "debug"
    } else {
        "info"
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();

    let result = match cli.command {
        Command::Point(a) => cmd_point(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Converge(a) => cmd_converge(a),
        Command::Overlay(a) => cmd_overlay(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            log::error!("{}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// Limits from the environment, as the final override.
fn env_limits(current: Limits) -> CliResult<Limits> {
    if std::env::var_os(MAX_DIM_ENV).is_some() {
        let env = Limits::from_env()?;
        Ok(Limits {
            max_dim: env.max_dim,
            ..current
        })
    } else {
        Ok(current)
    }
}

fn read_config_value(path: &Path) -> CliResult<(serde_json::Value, Option<String>)> {
    let text = std::fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    let is_toml = path
        .extension()
        .is_some_and(|ext| ext.eq_ignore_ascii_case("toml"));
    let value: serde_json::Value = if is_toml {
        toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?
    } else {
        serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?
    };
    // A manifest wraps the resolved config.
    if value.get("artifact_version").is_some() {
        if let Ok(m) = serde_json::from_value::<RunManifest>(value.clone()) {
            return Ok((m.config, Some(m.command)));
        }
    }
    Ok((value, None))
}

fn load_config<T: for<'de> Deserialize<'de>>(path: &Path, command: &str) -> CliResult<T> {
    let (value, from) = read_config_value(path)?;
    if let Some(from) = from {
        if from != command {
            return Err(usage(format!(
                "{} is a manifest for `{from}`, not `{command}`",
                path.display()
            )));
        }
    }
    serde_json::from_value(value).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn json_mirror_path(out: &Path) -> PathBuf {
    out.with_extension("json")
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io_failure(path, e))
}

fn finish(path: &Path, mut w: BufWriter<File>) -> CliResult<()> {
    w.flush().map_err(|e| io_failure(path, e))
}

fn write_manifest<C: Serialize>(command: &str, config: &C, outputs: &[&Path]) -> CliResult<()> {
    let Some(first) = outputs.first() else {
        return Ok(());
    };
    let manifest = RunManifest {
        command: command.to_string(),
        config: serde_json::to_value(config).map_err(GtbError::from)?,
        constants: UnitSystem::default(),
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        output_paths: outputs.iter().map(|p| p.display().to_string()).collect(),
    };
    let path = manifest_path(first);
    let mut w = create(&path)?;
    serde_json::to_writer_pretty(&mut w, &manifest).map_err(GtbError::from)?;
    writeln!(w).map_err(|e| io_failure(&path, e))?;
    finish(&path, w)
}

fn resolve_mode(g: &GeometryArgs) -> CliResult<SweepMode> {
    if g.resonant {
        return Ok(SweepMode::Resonant);
    }
    match g.mode {
        Some(m) => Ok(m.into()),
        None if g.eta.is_some() => Ok(SweepMode::Resonant),
        None if g.nu.is_some() && g.omega10_ev.is_some() => Ok(SweepMode::Detuned),
        None if g.nu.is_some() => Ok(SweepMode::Resonant),
        None => Err(usage(
            "give --eta (resonant) or --nu with --omega10-ev (detuned)",
        )),
    }
}

/// `(outer, ω₁₀)` from the geometry flags; the outer value is η or ν by mode.
fn resolve_geometry(g: &GeometryArgs, mode: SweepMode) -> CliResult<(f64, Option<f64>)> {
    match mode {
        SweepMode::Resonant => {
            if g.omega10_ev.is_some() {
                return Err(usage("--omega10-ev only applies to detuned points"));
            }
            match (g.eta, g.nu) {
                (Some(eta), None) => Ok((eta, None)),
                (None, Some(nu)) => Ok((eta_for_resonant_nu(nu)?, None)),
                (Some(_), Some(_)) => Err(usage("give either --eta or --nu for a resonant point")),
                (None, None) => Err(usage("a resonant point needs --eta or --nu")),
            }
        }
        SweepMode::Detuned => {
            if g.eta.is_some() {
                return Err(usage("--eta only applies to resonant points; give --nu"));
            }
            let nu = g.nu.ok_or_else(|| usage("a detuned point needs --nu"))?;
            let w = g
                .omega10_ev
                .ok_or_else(|| usage("a detuned point needs --omega10-ev"))?;
            Ok((nu, Some(w)))
        }
    }
}

fn displacement(literal: bool) -> DisplacementConvention {
    if literal {
        DisplacementConvention::Unscaled
    } else {
        DisplacementConvention::ModeScaled
    }
}

/// Solves f from g̃ when requested.
fn resolve_amplitude(g: &GeometryArgs, well_length: f64) -> CliResult<(f64, Option<f64>)> {
    match (g.f, g.gtilde) {
        (Some(f), None) => Ok((f, None)),
        (None, Some(gt)) => {
            let matter = MatterBasisSpec::electron(2, well_length)?;
            Ok((amplitude_for_g_tilde(gt, &matter)?, Some(gt)))
        }
        (None, None) => Err(usage("give --f or --gtilde")),
        (Some(_), Some(_)) => Err(usage("--f and --gtilde are exclusive")),
    }
}

fn point_config_from_flags(a: &PointArgs) -> CliResult<PointConfig> {
    let g = &a.geometry;
    let mode = resolve_mode(g)?;
    let (outer, omega10) = resolve_geometry(g, mode)?;
    let mut sweep = match mode {
        SweepMode::Resonant => SweepConfig::resonant_default(),
        SweepMode::Detuned => SweepConfig::detuned_default(omega10.expect("detuned")),
    };
    let (_, well_length) = point_geometry(&sweep, outer)?;
    let (f, g_tilde_requested) = resolve_amplitude(g, well_length)?;
    match mode {
        SweepMode::Resonant => sweep.eta_axis = Some(AxisSpec::Values(vec![outer])),
        SweepMode::Detuned => sweep.nu_axis = Some(AxisSpec::Values(vec![outer])),
    }
    sweep.f_axis = AxisSpec::Values(vec![f]);
    if let Some(tol) = g.tol {
        sweep.tol = tol;
    }
    if let Some(levels) = &a.levels {
        sweep.levels = levels.clone();
    }
    if let Some(gauges) = &a.gauges {
        sweep.gauges = gauges.clone();
    }
    sweep.displacement = displacement(g.literal);
    sweep.parallelism = 1;
    Ok(PointConfig {
        mode,
        outer,
        f_ev: f,
        g_tilde_requested,
        sweep,
    })
}

fn cmd_point(a: PointArgs) -> CliResult<()> {
    let mut config = match &a.config {
        Some(path) => load_config::<PointConfig>(path, "point")?,
        None => point_config_from_flags(&a)?,
    };
    if a.config.is_some() {
        // Flags that are safe to layer over a loaded point.
        if let Some(tol) = a.geometry.tol {
            config.sweep.tol = tol;
        }
        if let Some(levels) = &a.levels {
            config.sweep.levels = levels.clone();
        }
        if let Some(gauges) = &a.gauges {
            config.sweep.gauges = gauges.clone();
        }
        if a.geometry.literal {
            config.sweep.displacement = DisplacementConvention::Unscaled;
        }
    }
    config.sweep.convergence.solver.limits = env_limits(config.sweep.convergence.solver.limits)?;
    config.sweep.validate()?;

    let mut sink = match &a.out {
        Some(path) => Some((path.clone(), create(path)?)),
        None => None,
    };

    let (nu, well_length) = point_geometry(&config.sweep, config.outer)?;
    let detail: PointDetail = evaluate_point_detailed(&config.sweep, nu, well_length, config.f_ev)?;
    let p = &detail.point;
    let report = PointReport {
        config: &config,
        diagnostics: &detail.diagnostics,
        x10_um: gtb_core::constants::inv_ev_to_um(detail.diagnostics.x10),
        gap_exact_ev: p.gap_exact_ev,
        converged: p.converged,
        degenerate: p.degenerate,
        ground_degenerate: detail.exact.ground_degenerate,
        excited_degenerate: detail.exact.excited_degenerate,
        truncated: p
            .errors
            .iter()
            .zip(&detail.truncated)
            .map(|(e, r)| TruncatedReport {
                gauge: e.gauge,
                levels: e.levels,
                gap_ev: e.gap_ev,
                error: e.error,
                convergence: r,
            })
            .collect(),
        exact: &detail.exact,
    };
    let text = serde_json::to_string_pretty(&report).map_err(GtbError::from)?;
    match sink.take() {
        Some((path, mut w)) => {
            writeln!(w, "{text}").map_err(|e| io_failure(&path, e))?;
            finish(&path, w)?;
            write_manifest("point", &config, &[&path])?;
            log::info!("wrote {}", path.display());
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn cmd_converge(a: ConvergeArgs) -> CliResult<()> {
    let g = &a.geometry;
    let mode = resolve_mode(g)?;
    let (outer, omega10) = resolve_geometry(g, mode)?;
    let mut sweep = match mode {
        SweepMode::Resonant => SweepConfig::resonant_default(),
        SweepMode::Detuned => SweepConfig::detuned_default(omega10.expect("detuned")),
    };
    if let Some(tol) = g.tol {
        sweep.tol = tol;
    }
    sweep.convergence.solver.limits = env_limits(sweep.convergence.solver.limits)?;
    let (nu, well_length) = point_geometry(&sweep, outer)?;
    let (f, _) = resolve_amplitude(g, well_length)?;

    let mut sink = match &a.out {
        Some(path) => Some((path.clone(), create(path)?)),
        None => None,
    };
    let mut params = ModelParams::new(
        MatterBasisSpec::electron(a.levels.unwrap_or(2), well_length)?,
        PhotonBasisSpec::new(2, nu, f)?,
        a.gauge,
    )?;
    params.displacement = displacement(g.literal);
    let report = match a.levels {
        Some(_) => converge_fock(&params, sweep.tol, &sweep.convergence)?,
        None => converge_gap(&params, sweep.tol, &sweep.convergence)?,
    };
    let out = ConvergeReport {
        mode,
        nu_ev: nu,
        well_length,
        f_ev: f,
        diagnostics: coupling_diagnostics(&params)?,
        fixed_levels: a.levels,
        report: &report,
    };
    let text = serde_json::to_string_pretty(&out).map_err(GtbError::from)?;
    match sink.take() {
        Some((path, mut w)) => {
            writeln!(w, "{text}").map_err(|e| io_failure(&path, e))?;
            finish(&path, w)?;
            log::info!("wrote {}", path.display());
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn log_axis(
    current: Option<AxisSpec>,
    min: Option<f64>,
    max: Option<f64>,
    count: Option<usize>,
    values: &Option<Vec<f64>>,
) -> Option<AxisSpec> {
    if let Some(v) = values {
        return Some(AxisSpec::Values(v.clone()));
    }
    if min.is_none() && max.is_none() && count.is_none() {
        return current;
    }
    let (cmin, cmax, ccount) = match &current {
        Some(AxisSpec::Log { min, max, count }) => (*min, *max, *count),
        Some(AxisSpec::Values(v)) => (
            v.iter().copied().fold(f64::INFINITY, f64::min),
            v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            v.len(),
        ),
        None => (f64::NAN, f64::NAN, 0),
    };
    Some(AxisSpec::log(
        min.unwrap_or(cmin),
        max.unwrap_or(cmax),
        count.unwrap_or(ccount),
    ))
}

fn sweep_config(a: &SweepArgs) -> CliResult<SweepConfig> {
    let base = match &a.config {
        Some(path) => Some(load_config::<SweepConfig>(path, "sweep")?),
        None => None,
    };
    let mode: SweepMode = a
        .mode
        .map(Into::into)
        .or(base.as_ref().map(|c| c.mode))
        .unwrap_or(SweepMode::Resonant);
    let mut c = match base {
        Some(c) if c.mode == mode => c,
        Some(c) => {
            // Mode switched by flag: keep the shared settings, reset the axis.
            let fresh = match mode {
                SweepMode::Resonant => SweepConfig::resonant_default(),
                SweepMode::Detuned => SweepConfig::detuned_default(c.fixed_omega10.unwrap_or(1.0)),
            };
            SweepConfig {
                mode,
                eta_axis: fresh.eta_axis,
                nu_axis: fresh.nu_axis,
                fixed_omega10: fresh.fixed_omega10,
                ..c
            }
        }
        None => match mode {
            SweepMode::Resonant => SweepConfig::resonant_default(),
            SweepMode::Detuned => SweepConfig::detuned_default(a.omega10_ev.unwrap_or(1.0)),
        },
    };
    if let Some(w) = a.omega10_ev {
        if mode == SweepMode::Resonant {
            return Err(usage("--omega10-ev only applies to --mode detuned"));
        }
        c.fixed_omega10 = Some(w);
    }
    match mode {
        SweepMode::Resonant => {
            if a.nu_min.is_some()
                || a.nu_max.is_some()
                || a.nu_count.is_some()
                || a.nu_values.is_some()
            {
                return Err(usage("--nu-* flags apply to --mode detuned"));
            }
            c.eta_axis = log_axis(c.eta_axis, a.eta_min, a.eta_max, a.eta_count, &a.eta_values);
        }
        SweepMode::Detuned => {
            if a.eta_min.is_some()
                || a.eta_max.is_some()
                || a.eta_count.is_some()
                || a.eta_values.is_some()
            {
                return Err(usage("--eta-* flags apply to --mode resonant"));
            }
            c.nu_axis = log_axis(c.nu_axis, a.nu_min, a.nu_max, a.nu_count, &a.nu_values);
        }
    }
    c.f_axis =
        log_axis(Some(c.f_axis), a.f_min, a.f_max, a.f_count, &a.f_values).expect("f axis present");
    if let Some(levels) = &a.levels {
        c.levels = levels.clone();
    }
    if let Some(gauges) = &a.gauges {
        c.gauges = gauges.clone();
    }
    if let Some(tol) = a.tol {
        c.tol = tol;
    }
    if let Some(p) = a.parallel {
        c.parallelism = p;
    }
    if a.literal {
        c.displacement = DisplacementConvention::Unscaled;
    }
    c.convergence.solver.limits = env_limits(c.convergence.solver.limits)?;
    c.validate()?;
    Ok(c)
}

fn cmd_sweep(a: SweepArgs) -> CliResult<()> {
    let config = sweep_config(&a)?;
    if a.stdout && a.json {
        return Err(usage(
            "--json writes a file; it cannot be combined with --stdout",
        ));
    }
    // Open outputs first so an unwritable path fails before any work.
    let csv_sink = if a.stdout {
        None
    } else {
        Some(create(&a.out)?)
    };
    let json_path = json_mirror_path(&a.out);
    let json_sink = if a.json {
        Some(create(&json_path)?)
    } else {
        None
    };

    log::info!(
        "sweep: mode {}, {} points, tol {:e}",
        config.mode,
        config.point_count(),
        config.tol
    );
    let map = run_sweep(&config)?;
    let unconverged = map.points.iter().filter(|p| !p.converged).count();
    if unconverged > 0 {
        log::warn!(
            "{unconverged} of {} points did not converge",
            map.points.len()
        );
    }

    let mut outputs: Vec<&Path> = Vec::new();
    match csv_sink {
        Some(mut w) => {
            map.write_csv(&mut w)?;
            finish(&a.out, w)?;
            outputs.push(&a.out);
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            map.write_csv(&mut lock)?;
            lock.flush()
                .map_err(|e| io_failure(Path::new("<stdout>"), e))?;
        }
    }
    if let Some(mut w) = json_sink {
        let text = map.to_json_string()?;
        writeln!(w, "{text}").map_err(|e| io_failure(&json_path, e))?;
        finish(&json_path, w)?;
        outputs.push(&json_path);
    }
    write_manifest("sweep", &config, &outputs)?;
    for p in &outputs {
        log::info!("wrote {}", p.display());
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct OverlayConfig {
    regimes: Option<String>,
    units: LengthUnit,
}

fn cmd_overlay(a: OverlayArgs) -> CliResult<()> {
    let units = match a.units {
        UnitArg::Natural => LengthUnit::InvEv,
        UnitArg::Um => LengthUnit::Um,
    };
    let entries = load_regimes(a.regimes.as_deref())?;
    let rows = overlay_rows(&entries, units);
    if a.stdout {
        let stdout = std::io::stdout();
        write_overlay(&rows, stdout.lock())?;
        return Ok(());
    }
    let mut w = create(&a.out)?;
    write_overlay(&rows, &mut w)?;
    finish(&a.out, w)?;
    let config = OverlayConfig {
        regimes: a.regimes.as_ref().map(|p| p.display().to_string()),
        units,
    };
    write_manifest("overlay", &config, &[&a.out])?;
    log::info!("wrote {} regime rows to {}", rows.len(), a.out.display());
    Ok(())
}
