//! Coulomb-gauge and C-field Hamiltonians of one dipole and one cavity mode.
//!
//! Both act on `H_m ⊗ H_p` with combined index `i·N_p + k` (matter level
//! `i + 1`, Fock state `k`). Zero-point energies are dropped; only gaps are
//! meaningful.
//!
//! Coulomb gauge:
//! `H = H_m⊗I + (e/m) p⊗A + (e²/2m) I⊗A² + ν I⊗a†a`, `A = f(a + a†)`.
//!
//! C-field (multipolar partition):
//! `H = H_m⊗I − d⊗D + f²ν d²⊗I + ν I⊗c†c`, `d = −e x`, `D = −iνf(c† − c)`.
//! With [`DisplacementConvention::Unscaled`] the factor ν in `D` is dropped.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{GtbError, Result};
use crate::operators::{
    fock_number, fock_quadrature, isw_energies, isw_level, isw_momentum_element_im,
    isw_momentum_matrix, isw_position_element, isw_position_real, kron, HermitianOperator,
    MatterBasisSpec, PhotonBasisSpec,
};

/// Environment variable overriding [`Limits::max_dim`].
pub const MAX_DIM_ENV: &str = "GTB_MAX_DIM";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gauge {
    Coulomb,
    #[serde(rename = "cfield")]
    CField,
}

impl Gauge {
    pub const ALL: [Gauge; 2] = [Gauge::Coulomb, Gauge::CField];

    pub fn as_str(self) -> &'static str {
        match self {
            Gauge::Coulomb => "coulomb",
            Gauge::CField => "cfield",
        }
    }
}

impl fmt::Display for Gauge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Gauge {
    type Err = GtbError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "coulomb" => Ok(Gauge::Coulomb),
            "cfield" | "c-field" | "multipolar" => Ok(Gauge::CField),
            other => Err(GtbError::Config(format!("unknown gauge `{other}`"))),
        }
    }
}

/// Amplitude of the displacement field in the C-field Hamiltonian.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisplacementConvention {
    /// `D = −iνf(c† − c)`: unitarily equivalent to the Coulomb form.
    #[default]
    ModeScaled,
    /// `D = −if(c† − c)`, the displacement prefactor taken without ν.
    Unscaled,
}

/// Dimension caps for Hamiltonian construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Limits {
    /// Largest `N_m·N_p` accepted anywhere (structured operators, convergence loop).
    pub max_dim: usize,
    /// Largest `N_m·N_p` for which a dense matrix is materialized.
    pub max_dense_dim: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_dim: 1 << 18,
            max_dense_dim: 8192,
        }
    }
}

impl Limits {
    /// Defaults, with `max_dim` overridden by `GTB_MAX_DIM` when set.
    pub fn from_env() -> Result<Self> {
        let mut limits = Self::default();
        if let Ok(raw) = std::env::var(MAX_DIM_ENV) {
            let cap: usize = raw.trim().parse().map_err(|_| {
                GtbError::Config(format!(
                    "{MAX_DIM_ENV} must be a positive integer, got `{raw}`"
                ))
            })?;
            if cap == 0 {
                return Err(GtbError::Config(format!("{MAX_DIM_ENV} must be > 0")));
            }
            limits.max_dim = cap;
        }
        Ok(limits)
    }

    pub fn dense_cap(&self) -> usize {
        self.max_dense_dim.min(self.max_dim)
    }

    pub fn check(&self, dim: usize) -> Result<()> {
        if dim > self.max_dim {
            Err(GtbError::Resource {
                dim,
                cap: self.max_dim,
            })
        } else {
            Ok(())
        }
    }

    pub fn check_dense(&self, dim: usize) -> Result<()> {
        let cap = self.dense_cap();
        if dim > cap {
            Err(GtbError::Resource { dim, cap })
        } else {
            Ok(())
        }
    }
}

/// Everything needed to build one Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub matter: MatterBasisSpec,
    pub photon: PhotonBasisSpec,
    pub gauge: Gauge,
    #[serde(default)]
    pub displacement: DisplacementConvention,
}

impl ModelParams {
    pub fn new(matter: MatterBasisSpec, photon: PhotonBasisSpec, gauge: Gauge) -> Result<Self> {
        let params = Self {
            matter,
            photon,
            gauge,
            displacement: DisplacementConvention::ModeScaled,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        self.matter.validate()?;
        self.photon.validate()
    }

    pub fn dim(&self) -> usize {
        self.matter.n_levels * self.photon.n_fock
    }

    pub fn with_truncation(&self, n_levels: usize, n_fock: usize) -> Self {
        Self {
            matter: self.matter.with_levels(n_levels),
            photon: self.photon.with_fock(n_fock),
            ..*self
        }
    }

    pub fn with_gauge(&self, gauge: Gauge) -> Self {
        Self { gauge, ..*self }
    }

    /// `κ` in `D = −iκ(c† − c)`.
    pub fn displacement_amplitude(&self) -> f64 {
        match self.displacement {
            DisplacementConvention::ModeScaled => self.photon.mode_energy * self.photon.amplitude,
            DisplacementConvention::Unscaled => self.photon.amplitude,
        }
    }
}

fn expect_gauge(params: &ModelParams, gauge: Gauge) -> Result<()> {
    if params.gauge != gauge {
        return Err(GtbError::Config(format!(
            "parameters are for the {} gauge, builder is {}",
            params.gauge, gauge
        )));
    }
    Ok(())
}

fn diag(values: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(values))
}

/// Dense Coulomb-gauge Hamiltonian.
pub fn build_coulomb(params: &ModelParams) -> Result<HermitianOperator> {
    build_coulomb_with(params, &Limits::from_env()?)
}

pub fn build_coulomb_with(params: &ModelParams, limits: &Limits) -> Result<HermitianOperator> {
    expect_gauge(params, Gauge::Coulomb)?;
    params.validate()?;
    limits.check_dense(params.dim())?;
    let (nm, np) = (params.matter.n_levels, params.photon.n_fock);
    let MatterBasisSpec { mass, charge, .. } = params.matter;
    let PhotonBasisSpec {
        mode_energy: nu,
        amplitude: f,
        ..
    } = params.photon;

    let h_m = diag(&isw_energies(&params.matter)?);
    let p = isw_momentum_matrix(&params.matter)?;
    let a_field = fock_quadrature(np)? * f;
    let a_sq = &a_field * &a_field;
    let number = fock_number(np)?;
    let i_m = DMatrix::<f64>::identity(nm, nm);
    let i_p = DMatrix::<f64>::identity(np, np);

    let re = kron(&h_m, &i_p)
        + kron(&i_m, &a_sq) * (charge * charge / (2.0 * mass))
        + kron(&i_m, &number) * nu;
    // p has no real part, A no imaginary part.
    let im = kron(p.im(), &a_field) * (charge / mass);
    HermitianOperator::new(re, im)
}

/// Dense C-field Hamiltonian.
pub fn build_cfield(params: &ModelParams) -> Result<HermitianOperator> {
    build_cfield_with(params, &Limits::from_env()?)
}

pub fn build_cfield_with(params: &ModelParams, limits: &Limits) -> Result<HermitianOperator> {
    expect_gauge(params, Gauge::CField)?;
    params.validate()?;
    limits.check_dense(params.dim())?;
    let (nm, np) = (params.matter.n_levels, params.photon.n_fock);
    let charge = params.matter.charge;
    let PhotonBasisSpec {
        mode_energy: nu,
        amplitude: f,
        ..
    } = params.photon;

    let h_m = diag(&isw_energies(&params.matter)?);
    let d = isw_position_real(&params.matter)? * (-charge);
    let d_sq = &d * &d;
    let c = crate::operators::fock_annihilation(np)?;
    // D = −iκ(c† − c): real part zero, imaginary part −κ(c† − c).
    let d_field_im = (c.transpose() - &c) * (-params.displacement_amplitude());
    let number = fock_number(np)?;
    let i_m = DMatrix::<f64>::identity(nm, nm);
    let i_p = DMatrix::<f64>::identity(np, np);

    let re = kron(&h_m, &i_p) + kron(&d_sq, &i_p) * (f * f * nu) + kron(&i_m, &number) * nu;
    let im = -kron(&d, &d_field_im);
    HermitianOperator::new(re, im)
}

/// Dispatches on `params.gauge`.
pub fn build(params: &ModelParams) -> Result<HermitianOperator> {
    match params.gauge {
        Gauge::Coulomb => build_coulomb(params),
        Gauge::CField => build_cfield(params),
    }
}

pub fn build_with(params: &ModelParams, limits: &Limits) -> Result<HermitianOperator> {
    match params.gauge {
        Gauge::Coulomb => build_coulomb_with(params, limits),
        Gauge::CField => build_cfield_with(params, limits),
    }
}

/// Quarter-turn count `q` of the phase `i^q` attached to combined index `idx`.
fn phase_quarter_turns(gauge: Gauge, idx: usize, n_fock: usize) -> usize {
    match gauge {
        // i^n on matter level n (1-based)
        Gauge::Coulomb => (idx / n_fock + 1) % 4,
        // i^k on Fock state k
        Gauge::CField => (idx % n_fock) % 4,
    }
}

/// `(re + i·im)·i^q`, exact.
fn rotate(re: f64, im: f64, q: usize) -> (f64, f64) {
    match q % 4 {
        0 => (re, im),
        1 => (-im, re),
        2 => (-re, -im),
        _ => (im, -re),
    }
}

/// Applies the diagonal phase unitary that makes a builder's output real.
///
/// Returns `U†HU` with `U = diag(i^n)` over matter levels (Coulomb) or
/// `U = diag(i^k)` over Fock states (C-field). Powers of `i` only swap and
/// negate parts, so the result is exactly symmetric.
pub fn realify(h: &HermitianOperator, gauge: Gauge, n_fock: usize) -> Result<DMatrix<f64>> {
    let dim = h.dim();
    if n_fock == 0 || !dim.is_multiple_of(n_fock) {
        return Err(GtbError::Config(format!(
            "operator dimension {dim} is not a multiple of the Fock truncation {n_fock}"
        )));
    }
    let (re, im) = (h.re(), h.im());
    let scale = re.amax().max(im.amax()).max(1.0);
    let mut out = DMatrix::zeros(dim, dim);
    let mut residue = 0.0f64;
    for col in 0..dim {
        let qc = phase_quarter_turns(gauge, col, n_fock);
        for row in 0..dim {
            let qr = phase_quarter_turns(gauge, row, n_fock);
            let (r, i) = rotate(re[(row, col)], im[(row, col)], (qc + 4 - qr) % 4);
            out[(row, col)] = r;
            residue = residue.max(i.abs());
        }
    }
    if residue > 1e-12 * scale {
        return Err(GtbError::InternalConsistency(format!(
            "phase rotation left an imaginary residue of {residue:e} ({gauge} gauge)"
        )));
    }
    Ok(out)
}

/// A real symmetric Hamiltonian kept as a sum of Kronecker products
/// `Σ A_t ⊗ B_t`, with matter factors `A_t` and photon factors `B_t`.
///
/// This is the phase-rotated (real) form of the builders' output and is what
/// the iterative solvers consume; it never materializes the full matrix.
#[derive(Debug, Clone)]
pub struct TensorHamiltonian {
    n_matter: usize,
    n_photon: usize,
    terms: Vec<(DMatrix<f64>, DMatrix<f64>)>,
}

impl TensorHamiltonian {
    /// Builds the real form directly from closed-form matrix elements.
    pub fn realified(params: &ModelParams, limits: &Limits) -> Result<Self> {
        params.validate()?;
        limits.check(params.dim())?;
        let (nm, np) = (params.matter.n_levels, params.photon.n_fock);
        let MatterBasisSpec {
            well_length,
            mass,
            charge,
            ..
        } = params.matter;
        let PhotonBasisSpec {
            mode_energy: nu,
            amplitude: f,
            ..
        } = params.photon;
        let energies: Vec<f64> = (1..=nm).map(|n| isw_level(n, well_length, mass)).collect();
        let quad = fock_quadrature(np)?;
        let number = fock_number(np)?;
        let i_m = DMatrix::<f64>::identity(nm, nm);
        let i_p = DMatrix::<f64>::identity(np, np);

        let terms = match params.gauge {
            Gauge::Coulomb => {
                // i^{m-n} · (i·Im p_{nm}) is real and symmetric for n+m odd.
                let p_real = DMatrix::from_fn(nm, nm, |r, c| {
                    let v = isw_momentum_element_im(r + 1, c + 1, well_length);
                    if v == 0.0 {
                        return 0.0;
                    }
                    let q = (c + 4 - r % 4) % 4;
                    rotate(0.0, v, q).0
                });
                let a_field = &quad * f;
                let photon_diag =
                    &a_field * &a_field * (charge * charge / (2.0 * mass)) + number * nu;
                vec![
                    (diag(&energies), i_p),
                    (p_real * (charge / mass), a_field),
                    (i_m, photon_diag),
                ]
            }
            Gauge::CField => {
                let x = DMatrix::from_fn(nm, nm, |r, c| {
                    isw_position_element(r + 1, c + 1, well_length)
                });
                let d = x * (-charge);
                let matter_diag = diag(&energies) + &d * &d * (f * f * nu);
                // −d ⊗ D turns into d ⊗ κ(c + c†) after the Fock phase rotation.
                let kappa = params.displacement_amplitude();
                vec![(matter_diag, i_p), (d, quad * kappa), (i_m, number * nu)]
            }
        };
        Ok(Self {
            n_matter: nm,
            n_photon: np,
            terms,
        })
    }

    pub fn dim(&self) -> usize {
        self.n_matter * self.n_photon
    }

    pub fn n_matter(&self) -> usize {
        self.n_matter
    }

    pub fn n_photon(&self) -> usize {
        self.n_photon
    }

    /// The `(A_t, B_t)` pairs with `H = Σ_t A_t ⊗ B_t`.
    pub fn terms(&self) -> &[(DMatrix<f64>, DMatrix<f64>)] {
        &self.terms
    }

    /// `out = H·v`.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        let (nm, np) = (self.n_matter, self.n_photon);
        assert_eq!(v.len(), nm * np);
        assert_eq!(out.len(), nm * np);
        // Column-major (N_p × N_m) view: entry (k, i) is v[i·N_p + k],
        // so (A ⊗ B) v ↔ B · V · Aᵀ.
        let vm = nalgebra::DMatrixView::from_slice(v, np, nm);
        let mut om = nalgebra::DMatrixViewMut::from_slice(out, np, nm);
        om.fill(0.0);
        for (a, b) in &self.terms {
            let bv = b * vm;
            om.gemm(1.0, &bv, &a.transpose(), 1.0);
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let (nm, np) = (self.n_matter, self.n_photon);
        let mut out = vec![0.0; nm * np];
        for (a, b) in &self.terms {
            for i in 0..nm {
                let ai = a[(i, i)];
                if ai == 0.0 {
                    continue;
                }
                for k in 0..np {
                    out[i * np + k] += ai * b[(k, k)];
                }
            }
        }
        out
    }

    /// Upper bound on the spectral radius, `Σ_t ‖A_t‖_∞ ‖B_t‖_∞`.
    pub fn norm_bound(&self) -> f64 {
        let inf_norm = |m: &DMatrix<f64>| {
            m.row_iter()
                .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0, f64::max)
        };
        self.terms
            .iter()
            .map(|(a, b)| inf_norm(a) * inf_norm(b))
            .sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        for (a, b) in &self.terms {
            out += kron(a, b);
        }
        out
    }
}

/// Well length and mode energy placing the lowest transition on resonance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonantGeometry {
    /// Mode energy ν = ε₂ − ε₁ (eV).
    pub nu: f64,
    /// Well length L (eV⁻¹).
    pub well_length: f64,
    /// |⟨1|x|2⟩| (eV⁻¹).
    pub x10: f64,
}

/// Solves `ε₂ − ε₁ = ν` together with `η = x₁₀ν/2π` for given η.
///
/// Closed form: `ν = (27π⁴m/32)·η²`, `L = π√(3/(2mν))`, `x₁₀ = 16L/(9π²)`.
pub fn resonant_geometry(eta: f64, mass: f64) -> Result<ResonantGeometry> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(GtbError::Domain(format!("eta must be > 0, got {eta}")));
    }
    if !(mass.is_finite() && mass > 0.0) {
        return Err(GtbError::Domain(format!("mass must be > 0, got {mass}")));
    }
    let nu = 27.0 * PI.powi(4) * mass / 32.0 * eta * eta;
    let well_length = well_length_for_transition(nu, mass)?;
    Ok(ResonantGeometry {
        nu,
        well_length,
        x10: transition_dipole_length(well_length),
    })
}

/// Well length whose lowest transition `3π²/(2mL²)` equals `omega10`.
pub fn well_length_for_transition(omega10: f64, mass: f64) -> Result<f64> {
    if !(omega10.is_finite() && omega10 > 0.0) {
        return Err(GtbError::Domain(format!(
            "omega10 must be > 0, got {omega10}"
        )));
    }
    if !(mass.is_finite() && mass > 0.0) {
        return Err(GtbError::Domain(format!("mass must be > 0, got {mass}")));
    }
    Ok(PI * (3.0 / (2.0 * mass * omega10)).sqrt())
}

/// `|x₁₂| = 16L/(9π²)`.
pub fn transition_dipole_length(well_length: f64) -> f64 {
    16.0 * well_length / (9.0 * PI * PI)
}

/// Field amplitude giving normalized coupling `g̃ = e|x₁₂|f`.
pub fn amplitude_for_g_tilde(g_tilde: f64, matter: &MatterBasisSpec) -> Result<f64> {
    if !(g_tilde.is_finite() && g_tilde >= 0.0) {
        return Err(GtbError::Domain(format!(
            "g_tilde must be >= 0, got {g_tilde}"
        )));
    }
    matter.validate()?;
    Ok(g_tilde / (matter.charge * transition_dipole_length(matter.well_length)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingDiagnostics {
    /// x₁₀ν/2π.
    pub eta: f64,
    /// g^C₁₀/ω₁₀.
    pub g_tilde: f64,
    /// Coulomb-gauge 1↔2 coupling (e/m)|p₁₂|f (eV).
    pub g_coulomb: f64,
    /// C-field 1↔2 coupling e|x₁₂|κ (eV), κ = νf by default.
    pub g_cfield: f64,
    pub omega10: f64,
    pub x10: f64,
}

pub fn coupling_diagnostics(params: &ModelParams) -> Result<CouplingDiagnostics> {
    params.validate()?;
    let MatterBasisSpec {
        well_length,
        mass,
        charge,
        ..
    } = params.matter;
    let nu = params.photon.mode_energy;
    let f = params.photon.amplitude;
    let omega10 = isw_level(2, well_length, mass) - isw_level(1, well_length, mass);
    let x10 = isw_position_element(1, 2, well_length).abs();
    let p12 = isw_momentum_element_im(1, 2, well_length).abs();
    let g_coulomb = charge / mass * p12 * f;
    let g_cfield = charge * x10 * params.displacement_amplitude();
    Ok(CouplingDiagnostics {
        eta: x10 * nu / (2.0 * PI),
        g_tilde: g_coulomb / omega10,
        g_coulomb,
        g_cfield,
        omega10,
        x10,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{elementary_charge, ELECTRON_MASS_EV};

    fn params(gauge: Gauge, nm: usize, np: usize, f: f64) -> ModelParams {
        let g = resonant_geometry(1e-3, ELECTRON_MASS_EV).unwrap();
        ModelParams::new(
            MatterBasisSpec::electron(nm, g.well_length).unwrap(),
            PhotonBasisSpec::new(np, g.nu, f).unwrap(),
            gauge,
        )
        .unwrap()
    }

    #[test]
    fn wrong_gauge_is_a_config_error() {
        let p = params(Gauge::Coulomb, 2, 2, 1.0);
        assert!(matches!(build_cfield(&p), Err(GtbError::Config(_))));
        assert!(matches!(
            build_coulomb(&p.with_gauge(Gauge::CField)),
            Err(GtbError::Config(_))
        ));
    }

    #[test]
    fn dense_builds_respect_cap() {
        let p = params(Gauge::Coulomb, 8, 8, 1.0);
        let limits = Limits {
            max_dim: 63,
            max_dense_dim: 8192,
        };
        match build_coulomb_with(&p, &limits) {
            Err(GtbError::Resource { dim, cap }) => assert_eq!((dim, cap), (64, 63)),
            other => panic!("expected resource error, got {other:?}"),
        }
        assert!(TensorHamiltonian::realified(&p, &limits).is_err());
    }

    #[test]
    fn coulomb_two_by_two_coupling_block() {
        let f = 1234.5;
        let p = params(Gauge::Coulomb, 2, 2, f);
        let h = build_coulomb(&p).unwrap();
        let diag = coupling_diagnostics(&p).unwrap();
        // ⟨1,0| H |2,1⟩
        let block = h.im()[(0, 3)].hypot(h.re()[(0, 3)]);
        let expect = diag.omega10 * elementary_charge() * diag.x10 * f;
        assert!((block - expect).abs() <= 1e-12 * expect);
        assert_eq!(h.hermiticity_defect(), 0.0);
    }

    #[test]
    fn cfield_self_energy_on_diagonal() {
        let f = 321.0;
        let p = params(Gauge::CField, 2, 3, f);
        let h = build_cfield(&p).unwrap();
        let e = elementary_charge();
        let l = p.matter.well_length;
        let nu = p.photon.mode_energy;
        let x12 = transition_dipole_length(l);
        // (d²)₁₁ = e²((L/2)² + x₁₂²) for N_m = 2.
        let d2 = e * e * (l * l / 4.0 + x12 * x12);
        let eps1 = isw_level(1, l, p.matter.mass);
        let expect = eps1 + f * f * nu * d2;
        assert!((h.re()[(0, 0)] - expect).abs() <= 1e-12 * expect);
        // The (L/2)² part alone.
        let diag_only = f * f * nu * (e * l / 2.0).powi(2);
        assert!(diag_only < f * f * nu * d2);
    }

    #[test]
    fn realify_turns_cfield_displacement_real() {
        let p = params(Gauge::CField, 2, 2, 10.0);
        let h = build_cfield(&p).unwrap();
        assert!(!h.is_real());
        let r = realify(&h, Gauge::CField, 2).unwrap();
        assert_eq!(r, r.transpose());
        // ⟨1,0|H|2,1⟩ becomes d₁₂ κ · (c + c†)₀₁ = −e x₁₂ νf.
        let kappa = p.displacement_amplitude();
        let d12 = -elementary_charge() * isw_position_element(1, 2, p.matter.well_length);
        assert!((r[(0, 3)] - d12 * kappa).abs() < 1e-12 * kappa.abs().max(1.0));
    }

    #[test]
    fn realify_is_identity_on_real_input() {
        let p = params(Gauge::Coulomb, 3, 4, 0.0);
        let h = build_coulomb(&p).unwrap();
        assert!(h.is_real());
        assert_eq!(realify(&h, Gauge::Coulomb, 4).unwrap(), *h.re());
    }

    #[test]
    fn realify_rejects_wrong_phase_pattern() {
        // An element 1 + i stays complex under any quarter-turn rotation.
        let mut re = DMatrix::zeros(4, 4);
        let mut im = DMatrix::zeros(4, 4);
        re[(0, 1)] = 1.0;
        re[(1, 0)] = 1.0;
        im[(0, 1)] = 1.0;
        im[(1, 0)] = -1.0;
        let h = HermitianOperator::new(re, im).unwrap();
        for gauge in Gauge::ALL {
            assert!(matches!(
                realify(&h, gauge, 2),
                Err(GtbError::InternalConsistency(_))
            ));
        }
        assert!(realify(&h, Gauge::Coulomb, 3).is_err());
    }

    #[test]
    fn tensor_form_matches_dense_realified() {
        for gauge in Gauge::ALL {
            for conv in [
                DisplacementConvention::ModeScaled,
                DisplacementConvention::Unscaled,
            ] {
                let mut p = params(gauge, 5, 6, 4.0e3);
                p.displacement = conv;
                let dense = realify(&build(&p).unwrap(), gauge, 6).unwrap();
                let tensor = TensorHamiltonian::realified(&p, &Limits::default()).unwrap();
                let scale = dense.amax();
                assert!((tensor.to_dense() - &dense).amax() <= 1e-13 * scale);
                let v: Vec<f64> = (0..30).map(|i| ((i * 7 % 11) as f64 - 5.0) / 3.0).collect();
                let mut out = vec![0.0; 30];
                tensor.apply(&v, &mut out);
                let reference = &dense * nalgebra::DVector::from_column_slice(&v);
                for (a, b) in out.iter().zip(reference.iter()) {
                    assert!((a - b).abs() <= 1e-12 * scale);
                }
                let d = tensor.diagonal();
                for (i, di) in d.iter().enumerate() {
                    assert!((di - dense[(i, i)]).abs() <= 1e-13 * scale);
                }
                assert!(tensor.norm_bound() >= scale);
            }
        }
    }

    #[test]
    fn resonant_geometry_closed_form() {
        let m = ELECTRON_MASS_EV;
        let g = resonant_geometry(1e-3, m).unwrap();
        let expected_nu = 27.0 * PI.powi(4) * m / 32.0 * 1e-6;
        assert!((g.nu - expected_nu).abs() <= 1e-14 * expected_nu);
        let w10 = isw_level(2, g.well_length, m) - isw_level(1, g.well_length, m);
        assert!((w10 - g.nu).abs() <= 1e-12 * g.nu);
        let eta = g.x10 * g.nu / (2.0 * PI);
        assert!((eta - 1e-3).abs() <= 1e-14);
        let g2 = resonant_geometry(2e-3, m).unwrap();
        assert!((g2.nu / g.nu - 4.0).abs() < 1e-14);
        assert!(matches!(
            resonant_geometry(0.0, m),
            Err(GtbError::Domain(_))
        ));
        assert!(matches!(
            resonant_geometry(-1.0, m),
            Err(GtbError::Domain(_))
        ));
    }

    #[test]
    fn resonant_geometry_matches_bisection_root() {
        // Eliminate ν: with ν = 3π²/(2mL²) and x₁₀ = 16L/(9π²),
        // η(L) = x₁₀ν/2π is monotone decreasing in L.
        let m = ELECTRON_MASS_EV;
        let eta = 1e-3;
        let eta_of = |l: f64| {
            let nu = 3.0 * PI * PI / (2.0 * m * l * l);
            16.0 * l / (9.0 * PI * PI) * nu / (2.0 * PI)
        };
        let (mut lo, mut hi) = (1e-12f64, 1e6f64);
        for _ in 0..400 {
            let mid = (lo * hi).sqrt();
            if eta_of(mid) > eta {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let l_root = (lo * hi).sqrt();
        let nu_root = 3.0 * PI * PI / (2.0 * m * l_root * l_root);
        let g = resonant_geometry(eta, m).unwrap();
        assert!((g.well_length - l_root).abs() <= 1e-12 * l_root);
        assert!((g.nu - nu_root).abs() <= 1e-11 * nu_root);
    }

    #[test]
    fn diagnostics_agree_at_resonance() {
        let p = params(Gauge::Coulomb, 2, 2, 2.0e4);
        let d = coupling_diagnostics(&p).unwrap();
        assert!((d.g_coulomb - d.g_cfield).abs() <= 1e-10 * d.g_coulomb);
        assert!((d.g_tilde - d.g_cfield / p.photon.mode_energy).abs() <= 1e-10 * d.g_tilde);
        assert!((d.eta - 1e-3).abs() < 1e-14);
        let zero = coupling_diagnostics(&params(Gauge::CField, 2, 2, 0.0)).unwrap();
        assert_eq!(zero.g_tilde, 0.0);
    }

    #[test]
    fn diagnostics_split_when_detuned() {
        let m = ELECTRON_MASS_EV;
        let l = well_length_for_transition(1.0, m).unwrap();
        let f = 100.0;
        let p = ModelParams::new(
            MatterBasisSpec::electron(2, l).unwrap(),
            PhotonBasisSpec::new(2, 2.0, f).unwrap(),
            Gauge::CField,
        )
        .unwrap();
        let d = coupling_diagnostics(&p).unwrap();
        assert!((d.omega10 - 1.0).abs() < 1e-12);
        let e = elementary_charge();
        let x12 = transition_dipole_length(l);
        assert!((d.g_coulomb - e * x12 * f).abs() <= 1e-12 * d.g_coulomb);
        assert!((d.g_cfield - e * x12 * 2.0 * f).abs() <= 1e-12 * d.g_cfield);
        let a = d.g_coulomb / d.omega10;
        let b = d.g_cfield / p.photon.mode_energy;
        assert!(
            (a - b).abs() < 1e-12 * a,
            "ratios coincide for the ν-scaled displacement"
        );
        assert!((d.g_cfield / d.omega10 - 2.0 * a).abs() < 1e-12 * a);
    }

    #[test]
    fn g_tilde_inversion() {
        let p = params(Gauge::Coulomb, 2, 2, 1.0);
        let f = amplitude_for_g_tilde(0.5, &p.matter).unwrap();
        let mut q = p;
        q.photon.amplitude = f;
        let d = coupling_diagnostics(&q).unwrap();
        assert!((d.g_tilde - 0.5).abs() < 1e-12);
        assert!(amplitude_for_g_tilde(-0.1, &p.matter).is_err());
    }

    #[test]
    fn gauge_parsing() {
        assert_eq!("coulomb".parse::<Gauge>().unwrap(), Gauge::Coulomb);
        assert_eq!("CField".parse::<Gauge>().unwrap(), Gauge::CField);
        assert!("lorenz".parse::<Gauge>().is_err());
        assert_eq!(serde_json::to_string(&Gauge::CField).unwrap(), "\"cfield\"");
    }
}
