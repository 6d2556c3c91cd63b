//! Matter and photon operator matrices in their truncated bases.
//!
//! Matter states are labelled by the 1-based quantum number `n` of the
//! infinite square well; row/column `n - 1` of every matter matrix belongs to
//! level `n`. Photon states are Fock states `|k>`, `k = 0..N_p`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::constants::{elementary_charge, ELECTRON_MASS_EV};
use crate::error::{GtbError, Result};

/// Per-element tolerance for the Hermitian symmetry invariants.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// A Hermitian matrix stored as separate real and imaginary parts.
///
/// `re` is symmetric and `im` antisymmetric, so `re + i·im` is Hermitian.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    re: DMatrix<f64>,
    im: DMatrix<f64>,
}

impl HermitianOperator {
    pub fn new(re: DMatrix<f64>, im: DMatrix<f64>) -> Result<Self> {
        let dim = re.nrows();
        if dim == 0 {
            return Err(GtbError::Config("operator dimension must be >= 1".into()));
        }
        if re.ncols() != dim || im.nrows() != dim || im.ncols() != dim {
            return Err(GtbError::Config(format!(
                "real part {}x{} and imaginary part {}x{} must be equal squares",
                re.nrows(),
                re.ncols(),
                im.nrows(),
                im.ncols()
            )));
        }
        let op = Self { re, im };
        let defect = op.hermiticity_defect();
        if defect > HERMITIAN_TOL {
            return Err(GtbError::InternalConsistency(format!(
                "matrix is not Hermitian: max |H - H^dagger| = {defect:e}"
            )));
        }
        Ok(op)
    }

    /// Wraps a real symmetric matrix.
    pub fn from_real(re: DMatrix<f64>) -> Result<Self> {
        let n = re.nrows();
        Self::new(re, DMatrix::zeros(n, n))
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::from_real(DMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.re.nrows()
    }

    pub fn re(&self) -> &DMatrix<f64> {
        &self.re
    }

    pub fn im(&self) -> &DMatrix<f64> {
        &self.im
    }

    pub fn into_parts(self) -> (DMatrix<f64>, DMatrix<f64>) {
        (self.re, self.im)
    }

    pub fn is_real(&self) -> bool {
        self.im.iter().all(|&v| v == 0.0)
    }

    /// Largest element of `|H - H†|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let dr = (self.re[(i, j)] - self.re[(j, i)]).abs();
                let di = (self.im[(i, j)] + self.im[(j, i)]).abs();
                worst = worst.max(dr.hypot(di));
            }
        }
        worst
    }

    pub fn to_complex(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.dim(), self.dim(), |i, j| {
            Complex64::new(self.re[(i, j)], self.im[(i, j)])
        })
    }

    /// Kronecker product of two Hermitian operators (Hermitian again).
    pub fn kron(&self, other: &Self) -> Self {
        let re = kron(&self.re, &other.re) - kron(&self.im, &other.im);
        let im = kron(&self.re, &other.im) + kron(&self.im, &other.re);
        Self { re, im }
    }
}

/// Standard Kronecker product; entry `(i·rows_b + k, j·cols_b + l)` is `a[i,j]·b[k,l]`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Truncated matter basis of the infinite square well.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatterBasisSpec {
    /// Number of retained levels `N_m`.
    pub n_levels: usize,
    /// Well length `L` in eV⁻¹.
    pub well_length: f64,
    /// Particle mass in eV.
    pub mass: f64,
    /// Charge magnitude `e` in natural units.
    pub charge: f64,
}

impl MatterBasisSpec {
    pub fn new(n_levels: usize, well_length: f64, mass: f64, charge: f64) -> Result<Self> {
        let spec = Self {
            n_levels,
            well_length,
            mass,
            charge,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// An electron with the default natural-unit charge.
    pub fn electron(n_levels: usize, well_length: f64) -> Result<Self> {
        Self::new(n_levels, well_length, ELECTRON_MASS_EV, elementary_charge())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_levels < 2 {
            return Err(GtbError::Config(format!(
                "matter basis needs at least 2 levels, got {}",
                self.n_levels
            )));
        }
        positive_finite("well length", self.well_length)?;
        positive_finite("mass", self.mass)?;
        positive_finite("charge", self.charge)?;
        Ok(())
    }

    pub fn with_levels(&self, n_levels: usize) -> Self {
        Self { n_levels, ..*self }
    }
}

/// Truncated Fock basis of the single cavity mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonBasisSpec {
    /// Number of retained Fock states `N_p`.
    pub n_fock: usize,
    /// Mode energy `ν` in eV.
    pub mode_energy: f64,
    /// Field amplitude `f` in eV.
    pub amplitude: f64,
}

impl PhotonBasisSpec {
    pub fn new(n_fock: usize, mode_energy: f64, amplitude: f64) -> Result<Self> {
        let spec = Self {
            n_fock,
            mode_energy,
            amplitude,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_fock < 2 {
            return Err(GtbError::Config(format!(
                "photon basis needs at least 2 Fock states, got {}",
                self.n_fock
            )));
        }
        positive_finite("mode energy", self.mode_energy)?;
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return Err(GtbError::Config(format!(
                "field amplitude must be finite and >= 0, got {}",
                self.amplitude
            )));
        }
        Ok(())
    }

    pub fn with_fock(&self, n_fock: usize) -> Self {
        Self { n_fock, ..*self }
    }
}

fn positive_finite(what: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(GtbError::Config(format!(
            "{what} must be finite and > 0, got {value}"
        )))
    }
}

/// Energy of level `n` (1-based) of a well of length `length` for mass `mass`.
pub fn isw_level(n: usize, length: f64, mass: f64) -> f64 {
    let n = n as f64;
    PI * PI * n * n / (2.0 * mass * length * length)
}

/// Eigenenergies `ε_1..ε_{N_m}` of the infinite square well.
pub fn isw_energies(spec: &MatterBasisSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    Ok((1..=spec.n_levels)
        .map(|n| isw_level(n, spec.well_length, spec.mass))
        .collect())
}

/// `⟨n|x|m⟩` for 1-based levels `n, m` of a well of length `length`.
pub fn isw_position_element(n: usize, m: usize, length: f64) -> f64 {
    if n == m {
        return length / 2.0;
    }
    if (n + m).is_multiple_of(2) {
        return 0.0;
    }
    let (nf, mf) = (n as f64, m as f64);
    let diff = nf * nf - mf * mf;
    -8.0 * length / (PI * PI) * nf * mf / (diff * diff)
}

/// Imaginary part of `⟨n|p|m⟩`; the real part vanishes identically.
pub fn isw_momentum_element_im(n: usize, m: usize, length: f64) -> f64 {
    if (n + m).is_multiple_of(2) {
        return 0.0;
    }
    // 4/(iL) · nm/(n²-m²) = -i · 4nm / (L (n²-m²))
    let (nf, mf) = (n as f64, m as f64);
    -4.0 / length * nf * mf / (nf * nf - mf * mf)
}

/// Position matrix `x` in the energy eigenbasis (real symmetric, eV⁻¹).
pub fn isw_position_matrix(spec: &MatterBasisSpec) -> Result<HermitianOperator> {
    let x = isw_position_real(spec)?;
    let n = spec.n_levels;
    Ok(HermitianOperator {
        re: x,
        im: DMatrix::zeros(n, n),
    })
}

/// Momentum matrix `p` in the energy eigenbasis (purely imaginary, eV).
pub fn isw_momentum_matrix(spec: &MatterBasisSpec) -> Result<HermitianOperator> {
    spec.validate()?;
    let n = spec.n_levels;
    let mut im = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = isw_momentum_element_im(i + 1, j + 1, spec.well_length);
            im[(i, j)] = v;
            im[(j, i)] = -v;
        }
    }
    Ok(HermitianOperator {
        re: DMatrix::zeros(n, n),
        im,
    })
}

pub(crate) fn isw_position_real(spec: &MatterBasisSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let n = spec.n_levels;
    let mut x = DMatrix::zeros(n, n);
    for i in 0..n {
        x[(i, i)] = isw_position_element(i + 1, i + 1, spec.well_length);
        for j in (i + 1)..n {
            let v = isw_position_element(i + 1, j + 1, spec.well_length);
            x[(i, j)] = v;
            x[(j, i)] = v;
        }
    }
    Ok(x)
}

/// Truncated annihilation matrix: `a[k-1, k] = √k`.
///
/// Not Hermitian, so it is returned as a plain real matrix.
pub fn fock_annihilation(n_fock: usize) -> Result<DMatrix<f64>> {
    if n_fock < 2 {
        return Err(GtbError::Config(format!(
            "Fock truncation must be >= 2, got {n_fock}"
        )));
    }
    let mut a = DMatrix::zeros(n_fock, n_fock);
    for k in 1..n_fock {
        a[(k - 1, k)] = (k as f64).sqrt();
    }
    Ok(a)
}

/// `a + a†` for a truncated Fock space.
pub fn fock_quadrature(n_fock: usize) -> Result<DMatrix<f64>> {
    let a = fock_annihilation(n_fock)?;
    Ok(&a + a.transpose())
}

/// Number operator `a†a = diag(0, 1, ..., n - 1)`, exact in floating point.
pub fn fock_number(n_fock: usize) -> Result<DMatrix<f64>> {
    fock_annihilation(n_fock)?;
    Ok(DMatrix::from_fn(n_fock, n_fock, |i, j| {
        if i == j {
            i as f64
        } else {
            0.0
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize, l: f64, m: f64) -> MatterBasisSpec {
        MatterBasisSpec::new(n, l, m, 1.0).unwrap()
    }

    #[test]
    fn energies_reduce_to_squares() {
        let e = isw_energies(&spec(2, PI, 0.5)).unwrap();
        assert!((e[0] - 1.0).abs() < 1e-14);
        assert!((e[1] - 4.0).abs() < 1e-14);
        let e = isw_energies(&spec(3, 1.0, 1.0)).unwrap();
        assert_eq!(e[2] / e[0], 9.0);
        assert!(e.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(MatterBasisSpec::new(1, 1.0, 1.0, 1.0).is_err());
        assert!(MatterBasisSpec::new(2, 0.0, 1.0, 1.0).is_err());
        assert!(MatterBasisSpec::new(2, 1.0, -1.0, 1.0).is_err());
        assert!(MatterBasisSpec::new(2, 1.0, 1.0, 0.0).is_err());
        assert!(MatterBasisSpec::new(2, f64::NAN, 1.0, 1.0).is_err());
        assert!(PhotonBasisSpec::new(1, 1.0, 0.0).is_err());
        assert!(PhotonBasisSpec::new(2, 0.0, 0.0).is_err());
        assert!(PhotonBasisSpec::new(2, 1.0, -1e-3).is_err());
        assert!(PhotonBasisSpec::new(2, 1.0, 0.0).is_ok());
        let bad = MatterBasisSpec {
            n_levels: 0,
            well_length: 1.0,
            mass: 1.0,
            charge: 1.0,
        };
        assert!(matches!(isw_energies(&bad), Err(GtbError::Config(_))));
    }

    #[test]
    fn position_matrix_closed_form() {
        let l = 2.5;
        let x = isw_position_matrix(&spec(4, l, 1.0)).unwrap();
        assert!(x.is_real());
        assert_eq!(x.re()[(0, 0)], l / 2.0);
        assert_eq!(x.re()[(0, 2)], 0.0);
        assert!((x.re()[(0, 1)] + 16.0 * l / (9.0 * PI * PI)).abs() < 1e-15);
        assert!((x.re()[(0, 1)] / l + 0.180127).abs() < 1e-6);
        assert_eq!(x.hermiticity_defect(), 0.0);
    }

    #[test]
    fn momentum_matrix_is_imaginary_antisymmetric() {
        let l = 1.7;
        let p = isw_momentum_matrix(&spec(5, l, 1.0)).unwrap();
        assert!(p.re().iter().all(|&v| v == 0.0));
        for i in 0..5 {
            assert_eq!(p.im()[(i, i)], 0.0);
            for j in 0..5 {
                assert_eq!(p.im()[(i, j)], -p.im()[(j, i)]);
            }
        }
        assert!((p.im()[(0, 1)] - 8.0 / (3.0 * l)).abs() < 1e-15);
    }

    #[test]
    fn fock_ladder_shapes() {
        assert!(fock_annihilation(1).is_err());
        let a = fock_annihilation(2).unwrap();
        assert_eq!(a, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]));
        let n = fock_number(3).unwrap();
        assert_eq!(
            n,
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.0, 1.0, 2.0]))
        );
    }

    #[test]
    fn quadrature_squared_has_odd_diagonal_until_boundary() {
        // Brute-force product of the explicit ladder matrix.
        let n = 4;
        let mut a = vec![vec![0.0; n]; n];
        for k in 1..n {
            a[k - 1][k] = (k as f64).sqrt();
        }
        let x: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| a[i][j] + a[j][i]).collect())
            .collect();
        let mut x2 = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                x2[i][j] = (0..n).map(|k| x[i][k] * x[k][j]).sum();
            }
        }
        let q = fock_quadrature(n).unwrap();
        let q2 = &q * &q;
        for i in 0..n {
            for j in 0..n {
                assert!((q2[(i, j)] - x2[i][j]).abs() < 1e-14);
            }
        }
        // 2k+1 below the boundary row, which only sees the lowering half.
        assert!((q2[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((q2[(1, 1)] - 3.0).abs() < 1e-14);
        assert!((q2[(2, 2)] - 5.0).abs() < 1e-14);
        assert!((q2[(3, 3)] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn kron_identities() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let i3 = DMatrix::<f64>::identity(3, 3);
        assert_eq!(kron(&i2, &i3), DMatrix::identity(6, 6));
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0]));
        let k = kron(&d, &i2);
        assert_eq!(
            k,
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 1.0, 2.0, 2.0]))
        );
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = DMatrix::from_row_slice(2, 2, &[0.5, -1.0, 2.0, 0.0]);
        let k = kron(&a, &b);
        assert_eq!(k.shape(), (4, 6));
        for i in 0..2 {
            for j in 0..3 {
                for p in 0..2 {
                    for q in 0..2 {
                        assert_eq!(k[(i * 2 + p, j * 2 + q)], a[(i, j)] * b[(p, q)]);
                    }
                }
            }
        }
    }

    #[test]
    fn hermitian_constructor_rejects_asymmetry() {
        let re = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.1, 1.0]);
        assert!(HermitianOperator::from_real(re).is_err());
        let im = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(HermitianOperator::new(DMatrix::zeros(2, 2), im).is_err());
        assert!(HermitianOperator::new(DMatrix::zeros(0, 0), DMatrix::zeros(0, 0)).is_err());
    }
}
