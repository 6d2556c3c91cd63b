//! Dense real symmetric eigensolver: Householder tridiagonalization followed
//! by the implicit-shift QL iteration (the EISPACK `tred2`/`tql2` pair).

use nalgebra::DMatrix;

use crate::error::{GtbError, Result};

/// Relative symmetry tolerance accepted on input.
pub const SYMMETRY_TOL: f64 = 1e-10;

const MAX_QL_SWEEPS: usize = 64;

/// Eigenvalues in ascending order, optionally with eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Option<DMatrix<f64>>,
}

pub fn symmetry_defect(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

fn check_input(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(GtbError::Domain(format!(
            "eigensolver needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(GtbError::Domain("matrix has non-finite entries".into()));
    }
    let defect = symmetry_defect(m);
    if defect > SYMMETRY_TOL * m.amax().max(1.0) {
        return Err(GtbError::Domain(format!(
            "matrix is not symmetric (max |M - Mᵀ| = {defect:e})"
        )));
    }
    Ok(())
}

/// All eigenvalues of a real symmetric matrix, ascending.
pub fn eigensolve_symmetric(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    Ok(decompose(m, false)?.values)
}

/// Eigenvalues and orthonormal eigenvectors (columns), ascending.
pub fn eigensolve_symmetric_vectors(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let eig = decompose(m, true)?;
    Ok((eig.values, eig.vectors.expect("vectors requested")))
}

pub fn decompose(m: &DMatrix<f64>, want_vectors: bool) -> Result<SymmetricEigen> {
    check_input(m)?;
    let n = m.nrows();
    if n == 0 {
        return Ok(SymmetricEigen {
            values: Vec::new(),
            vectors: want_vectors.then(|| DMatrix::zeros(0, 0)),
        });
    }
    // Column-major working copy (`(i, j)` at `j * n + i`), so the column
    // sweeps in both stages are contiguous. Only the lower triangle is read.
    let mut v = m.as_slice().to_vec();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(n, &mut v, &mut d, &mut e, want_vectors);
    e.rotate_left(1);
    e[n - 1] = 0.0;
    let mut z = want_vectors.then_some(v);
    tridiagonal_ql(&mut d, &mut e, z.as_deref_mut())?;
    Ok(finish(n, d, z))
}

/// Eigen-decomposition of the symmetric tridiagonal matrix with diagonal
/// `diag` and sub-diagonal `off` (`off[i]` couples `i` and `i + 1`).
pub fn tridiagonal_eigen(diag: &[f64], off: &[f64], want_vectors: bool) -> Result<SymmetricEigen> {
    let n = diag.len();
    assert!(off.len() + 1 >= n, "sub-diagonal too short");
    let mut d = diag.to_vec();
    // tql2 expects e[i] to couple i and i+1 with e[n-1] = 0.
    let mut e = vec![0.0; n];
    if n > 1 {
        e[..n - 1].copy_from_slice(&off[..n - 1]);
    }
    let mut z = want_vectors.then(|| {
        let mut z = vec![0.0; n * n];
        for i in 0..n {
            z[i * n + i] = 1.0;
        }
        z
    });
    tridiagonal_ql(&mut d, &mut e, z.as_deref_mut())?;
    Ok(finish(n, d, z))
}

fn finish(n: usize, d: Vec<f64>, z: Option<Vec<f64>>) -> SymmetricEigen {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
    let values = order.iter().map(|&k| d[k]).collect();
    let vectors = z.map(|z| DMatrix::from_fn(n, n, |row, col| z[order[col] * n + row]));
    SymmetricEigen { values, vectors }
}

/// Householder reduction of the column-major symmetric matrix `v` to
/// tridiagonal form. On exit `d` holds the diagonal and `e[i]` couples
/// `i - 1` and `i`; when `accumulate` is set `v` holds the orthogonal
/// transformation.
fn tridiagonalize(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64], accumulate: bool) {
    let at = |i: usize, j: usize| j * n + i;
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                g = e[j] + v[at(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[at(k, j)] * d[k];
                    e[k] += v[at(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let fj = d[j];
                let gj = e[j];
                for k in j..i {
                    v[at(k, j)] -= fj * e[k] + gj * d[k];
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    if !accumulate {
        for i in 0..n {
            d[i] = v[at(i, i)];
        }
        e[0] = 0.0;
        return;
    }

    for i in 0..n.saturating_sub(1) {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[at(k, i + 1)] * v[at(k, j)];
                }
                for k in 0..=i {
                    v[at(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = 0.0;
    }
    v[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit QL on a symmetric tridiagonal matrix with `e[i]` coupling `i`
/// and `i + 1` (`e[n - 1] = 0`). Rotations are accumulated into the
/// column-major `z`.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64], mut z: Option<&mut [f64]>) -> Result<()> {
    let n = d.len();
    let eps = f64::EPSILON;
    let mut shift_total = 0.0;
    let mut tst1 = 0.0f64;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweeps > MAX_QL_SWEEPS {
                    return Err(GtbError::Numerical(format!(
                        "QL iteration did not converge for eigenvalue {l} of {n} after \
                         {MAX_QL_SWEEPS} sweeps (|e| = {:e}, threshold {:e})",
                        e[l].abs(),
                        eps * tst1
                    )));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                shift_total += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(z) = z.as_deref_mut() {
                        let (left, right) = z.split_at_mut((i + 1) * n);
                        let zi = &mut left[i * n..];
                        let zi1 = &mut right[..n];
                        for (zk, zk1) in zi.iter_mut().zip(zi1.iter_mut()) {
                            let (a, b) = (*zk, *zk1);
                            *zk1 = s * a + c * b;
                            *zk = c * a - s * b;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += shift_total;
        e[l] = 0.0;
    }
    Ok(())
}
