//! Experimental-regime guide values for overlays, plus the dipole-size
//! estimators used to place experiments on the (η, g̃) plane.
//!
//! The bundled table holds eight experimental families. Values are guide
//! values built from estimated parameters; point values are stored as
//! degenerate ranges.

use serde::{Deserialize, Serialize};
use std::io::Read;
use std::path::Path;

use crate::constants::{inv_ev_to_um, um_to_inv_ev, FINE_STRUCTURE};
use crate::error::{GtbError, Result};

/// The bundled regime table.
pub const BUNDLED_REGIMES_CSV: &str = include_str!("../data/regimes.csv");

pub const REGIME_COLUMNS: [&str; 13] = [
    "name",
    "eta_min",
    "eta_max",
    "f_min_eV",
    "f_max_eV",
    "dipole_min_um",
    "dipole_max_um",
    "g_over_nu_min",
    "g_over_nu_max",
    "g_over_w10_min",
    "g_over_w10_max",
    "caution",
    "citations",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub fn point(value: f64) -> Self {
        Self {
            min: value,
            max: value,
        }
    }

    /// Geometric midpoint, the natural marker position on log axes.
    pub fn log_mid(&self) -> f64 {
        (self.min * self.max).sqrt()
    }

    fn scaled(&self, factor: f64) -> Self {
        Self {
            min: self.min * factor,
            max: self.max * factor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeEntry {
    pub name: String,
    pub eta_range: Range,
    pub f_range_ev: Range,
    pub dipole_size_um: Range,
    pub g_over_nu: Range,
    pub g_over_omega10: Range,
    /// Set where the source table marks a value as suspiciously large.
    pub caution_flag: bool,
    pub citation_keys: Vec<String>,
}

fn parse_number(raw: &str, row: usize, column: &str) -> Result<f64> {
    let value: f64 = raw.trim().parse().map_err(|_| GtbError::Parse {
        row,
        column: column.to_string(),
        message: format!("`{raw}` is not a number"),
    })?;
    if !(value.is_finite() && value > 0.0) {
        return Err(GtbError::Parse {
            row,
            column: column.to_string(),
            message: format!("value {value} must be positive"),
        });
    }
    Ok(value)
}

fn parse_range(record: &csv::StringRecord, row: usize, lo: usize, hi: usize) -> Result<Range> {
    let min = parse_number(&record[lo], row, REGIME_COLUMNS[lo])?;
    let max = parse_number(&record[hi], row, REGIME_COLUMNS[hi])?;
    if min > max {
        return Err(GtbError::Parse {
            row,
            column: REGIME_COLUMNS[lo].to_string(),
            message: format!("min {min} exceeds max {max}"),
        });
    }
    Ok(Range { min, max })
}

fn parse_bool(raw: &str, row: usize) -> Result<bool> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" | "" => Ok(false),
        other => Err(GtbError::Parse {
            row,
            column: "caution".into(),
            message: format!("`{other}` is not a boolean"),
        }),
    }
}

/// Parses the regime CSV schema. Rows are numbered from 1 (header is row 0).
pub fn parse_regimes<R: Read>(reader: R) -> Result<Vec<RegimeEntry>> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::Fields)
        .from_reader(reader);
    let mut records = csv.records();
    let header = match records.next() {
        None => {
            log::warn!("regime table is empty");
            return Ok(Vec::new());
        }
        Some(h) => h?,
    };
    let got: Vec<&str> = header.iter().collect();
    if got != REGIME_COLUMNS {
        let column = REGIME_COLUMNS
            .iter()
            .zip(got.iter().chain(std::iter::repeat(&"")))
            .find(|(want, have)| want != have)
            .map(|(want, _)| want.to_string())
            .unwrap_or_else(|| "<extra>".into());
        return Err(GtbError::Parse {
            row: 0,
            column,
            message: format!("header must be `{}`", REGIME_COLUMNS.join(",")),
        });
    }

    let mut entries = Vec::new();
    for (idx, record) in records.enumerate() {
        let row = idx + 1;
        let record = record?;
        if record.len() != REGIME_COLUMNS.len() {
            let column = REGIME_COLUMNS
                .get(record.len().min(REGIME_COLUMNS.len() - 1))
                .copied()
                .unwrap_or("citations");
            return Err(GtbError::Parse {
                row,
                column: column.to_string(),
                message: format!(
                    "expected {} fields, found {}",
                    REGIME_COLUMNS.len(),
                    record.len()
                ),
            });
        }
        let name = record[0].to_string();
        if name.is_empty() {
            return Err(GtbError::Parse {
                row,
                column: "name".into(),
                message: "name is empty".into(),
            });
        }
        entries.push(RegimeEntry {
            name,
            eta_range: parse_range(&record, row, 1, 2)?,
            f_range_ev: parse_range(&record, row, 3, 4)?,
            dipole_size_um: parse_range(&record, row, 5, 6)?,
            g_over_nu: parse_range(&record, row, 7, 8)?,
            g_over_omega10: parse_range(&record, row, 9, 10)?,
            caution_flag: parse_bool(&record[11], row)?,
            citation_keys: record[12]
                .split(';')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(String::from)
                .collect(),
        });
    }
    Ok(entries)
}

pub fn bundled_regimes() -> Vec<RegimeEntry> {
    parse_regimes(BUNDLED_REGIMES_CSV.as_bytes()).expect("bundled regime table is well formed")
}

pub fn load_regimes(path: Option<&Path>) -> Result<Vec<RegimeEntry>> {
    match path {
        None => Ok(bundled_regimes()),
        Some(p) => parse_regimes(std::fs::File::open(p)?),
    }
}

/// Writes entries back in the same schema.
pub fn write_regimes<W: std::io::Write>(entries: &[RegimeEntry], writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(REGIME_COLUMNS)?;
    for e in entries {
        let nums = [
            e.eta_range,
            e.f_range_ev,
            e.dipole_size_um,
            e.g_over_nu,
            e.g_over_omega10,
        ];
        let mut fields = vec![e.name.clone()];
        for r in nums {
            fields.push(format!("{:e}", r.min));
            fields.push(format!("{:e}", r.max));
        }
        fields.push(e.caution_flag.to_string());
        fields.push(e.citation_keys.join(";"));
        out.write_record(&fields)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LengthUnit {
    /// Natural units, eV⁻¹.
    #[default]
    InvEv,
    Um,
}

impl LengthUnit {
    pub fn label(self) -> &'static str {
        match self {
            LengthUnit::InvEv => "eV^-1",
            LengthUnit::Um => "um",
        }
    }
}

impl std::str::FromStr for LengthUnit {
    type Err = GtbError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "um" | "micron" | "microns" => Ok(LengthUnit::Um),
            "ev-1" | "inv-ev" | "natural" => Ok(LengthUnit::InvEv),
            other => Err(GtbError::Config(format!("unknown length unit `{other}`"))),
        }
    }
}

/// One overlay row in sweep-axis coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlayRow {
    pub name: String,
    pub eta_min: f64,
    pub eta_max: f64,
    pub eta_mid: f64,
    #[serde(rename = "f_min_eV")]
    pub f_min_ev: f64,
    #[serde(rename = "f_max_eV")]
    pub f_max_ev: f64,
    #[serde(rename = "f_mid_eV")]
    pub f_mid_ev: f64,
    pub g_tilde_min: f64,
    pub g_tilde_max: f64,
    pub g_over_w10_min: f64,
    pub g_over_w10_max: f64,
    pub dipole_min: f64,
    pub dipole_max: f64,
    pub dipole_units: String,
    pub caution: bool,
}

/// Projects regimes onto the sweep axes. On resonance `g̃ = g/ν`.
pub fn overlay_rows(entries: &[RegimeEntry], units: LengthUnit) -> Vec<OverlayRow> {
    entries
        .iter()
        .map(|e| {
            let dipole = match units {
                LengthUnit::Um => e.dipole_size_um,
                LengthUnit::InvEv => e.dipole_size_um.scaled(um_to_inv_ev(1.0)),
            };
            OverlayRow {
                name: e.name.clone(),
                eta_min: e.eta_range.min,
                eta_max: e.eta_range.max,
                eta_mid: e.eta_range.log_mid(),
                f_min_ev: e.f_range_ev.min,
                f_max_ev: e.f_range_ev.max,
                f_mid_ev: e.f_range_ev.log_mid(),
                g_tilde_min: e.g_over_nu.min,
                g_tilde_max: e.g_over_nu.max,
                g_over_w10_min: e.g_over_omega10.min,
                g_over_w10_max: e.g_over_omega10.max,
                dipole_min: dipole.min,
                dipole_max: dipole.max,
                dipole_units: units.label().to_string(),
                caution: e.caution_flag,
            }
        })
        .collect()
}

pub fn write_overlay<W: std::io::Write>(rows: &[OverlayRow], writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

fn require_positive(what: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(GtbError::Domain(format!("{what} must be > 0, got {value}")))
    }
}

/// `x₁₀ ≃ g/(e·E_vac)` (ħ = 1), in eV⁻¹.
pub fn dipole_size_from_coupling(g: f64, e_vac: f64, charge: f64) -> Result<f64> {
    require_positive("coupling g", g)?;
    require_positive("vacuum field E_vac", e_vac)?;
    require_positive("charge", charge)?;
    Ok(g / (charge * e_vac))
}

/// `a_eff ≃ α/(2ω₁₀)` (c = 1), in eV⁻¹.
pub fn effective_bohr_radius(omega10: f64) -> Result<f64> {
    require_positive("omega10", omega10)?;
    Ok(FINE_STRUCTURE / (2.0 * omega10))
}

/// `x₁₀ ≃ l₀√ν_fill` with magnetic length `l₀ = 1/√(eB)`, in eV⁻¹.
pub fn cyclotron_dipole_size(b_field: f64, filling: f64, charge: f64) -> Result<f64> {
    require_positive("magnetic field", b_field)?;
    require_positive("filling factor", filling)?;
    require_positive("charge", charge)?;
    Ok((filling / (charge * b_field)).sqrt())
}

/// Convenience for reports: eV⁻¹ to μm.
pub fn to_um(length_inv_ev: f64) -> f64 {
    inv_ev_to_um(length_inv_ev)
}
