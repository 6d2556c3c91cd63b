//! Iterative solvers for the few lowest eigenvalues of a large real
//! symmetric operator that is only available through matrix-vector products.
//!
//! Two solvers share the [`SymmetricOperator`] interface:
//!
//! * [`davidson`]: block Davidson. It starts with the diagonal (Jacobi)
//!   preconditioner, which converges in O(100) products while the matter
//!   energies `ε_n ∝ n²` dominate the diagonal. When the coupling dominates
//!   instead and progress stalls, it switches to a shifted factorization
//!   `(H − σ)⁻¹` with `σ` just below the spectrum.
//! * [`lanczos`]: single-vector Lanczos with full reorthogonalization.
//!   Its iteration count grows like `√(width/gap)`, so it is kept for
//!   cross-checking on moderate problems.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dense::{eigensolve_symmetric_vectors, tridiagonal_eigen};
use super::shift_invert::{factor_dense, BlockTridiagonalShifted, Factorization, ShiftedInverse};
use crate::error::{GtbError, Result};
use crate::hamiltonians::TensorHamiltonian;

/// Fixed seed for start vectors, so every solve is reproducible.
const START_SEED: u64 = 0x6774_625f_7374_6172;

pub trait SymmetricOperator {
    fn dim(&self) -> usize;
    fn apply(&self, v: &[f64], out: &mut [f64]);
    fn diagonal(&self) -> Vec<f64>;
    /// Any upper bound on the spectral radius; sets absolute tolerances.
    fn norm_bound(&self) -> f64;
    /// Factorization of `H − σ`, if the operator supports one.
    fn factor_shifted(&self, _sigma: f64, _budget_bytes: usize) -> Factorization<'_> {
        Factorization::Unavailable
    }
}

impl SymmetricOperator for TensorHamiltonian {
    fn dim(&self) -> usize {
        TensorHamiltonian::dim(self)
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        TensorHamiltonian::apply(self, v, out)
    }

    fn diagonal(&self) -> Vec<f64> {
        TensorHamiltonian::diagonal(self)
    }

    fn norm_bound(&self) -> f64 {
        TensorHamiltonian::norm_bound(self)
    }

    fn factor_shifted(&self, sigma: f64, budget_bytes: usize) -> Factorization<'_> {
        BlockTridiagonalShifted::factor(self, sigma, budget_bytes)
    }
}

impl SymmetricOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let x = nalgebra::DVectorView::from_slice(v, v.len());
        let mut y = nalgebra::DVectorViewMut::from_slice(out, v.len());
        y.gemv(1.0, self, &x, 0.0);
    }

    fn diagonal(&self) -> Vec<f64> {
        self.diagonal().iter().copied().collect()
    }

    fn norm_bound(&self) -> f64 {
        self.row_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    fn factor_shifted(&self, sigma: f64, budget_bytes: usize) -> Factorization<'_> {
        factor_dense(self, sigma, budget_bytes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterativeOptions {
    /// Residual threshold `‖Hx − θx‖ ≤ rtol·‖H‖`.
    pub residual_rtol: f64,
    pub max_iterations: usize,
    /// Davidson subspace size before a thick restart.
    pub max_subspace: usize,
    /// Davidson iterations with the diagonal preconditioner before trying a
    /// shifted factorization; 0 disables the switch.
    pub escalate_after: usize,
    /// Memory cap for the shifted factorization.
    pub factor_budget_bytes: usize,
}

impl Default for IterativeOptions {
    fn default() -> Self {
        Self {
            residual_rtol: 1e-12,
            max_iterations: 2000,
            max_subspace: 48,
            escalate_after: 25,
            factor_budget_bytes: 512 << 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterativeOutcome {
    /// Lowest `nev` eigenvalues, ascending.
    pub values: Vec<f64>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub matvecs: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Orthogonalizes `v` against `basis` twice (classical Gram–Schmidt, CGS2),
/// normalizes, and reports whether anything survived.
fn orthonormalize_against(basis: &[Vec<f64>], v: &mut [f64]) -> bool {
    let before = norm(v);
    if before == 0.0 || !before.is_finite() {
        return false;
    }
    for _ in 0..2 {
        let coeffs: Vec<f64> = basis.iter().map(|q| dot(q, v)).collect();
        for (q, c) in basis.iter().zip(coeffs) {
            axpy(-c, q, v);
        }
    }
    let after = norm(v);
    if after <= 1e-10 * before {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= after);
    true
}

fn random_unit(n: usize, seed_offset: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED.wrapping_add(seed_offset));
    let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    v
}

fn check_request(n: usize, nev: usize) -> Result<()> {
    if nev == 0 || nev > n {
        return Err(GtbError::Domain(format!(
            "requested {nev} eigenvalues of a {n}-dimensional operator"
        )));
    }
    Ok(())
}

/// Lowest `nev` eigenvalues by block Davidson with diagonal preconditioning.
pub fn davidson<Op: SymmetricOperator + ?Sized>(
    op: &Op,
    nev: usize,
    opts: &IterativeOptions,
) -> Result<IterativeOutcome> {
    let n = op.dim();
    check_request(n, nev)?;
    let diag = op.diagonal();
    let scale = op.norm_bound().max(f64::MIN_POSITIVE);
    let tol = opts.residual_rtol * scale;
    let max_sub = opts.max_subspace.max(3 * nev + 2).min(n);

    // Start from the lowest diagonal entries plus one random vector, so no
    // symmetry sector is left out of the search space.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]).then(a.cmp(&b)));
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for &idx in order.iter().take((nev + 2).min(n)) {
        let mut v = vec![0.0; n];
        v[idx] = 1.0;
        basis.push(v);
    }
    if basis.len() < n {
        let mut r = random_unit(n, 0);
        if orthonormalize_against(&basis, &mut r) {
            basis.push(r);
        }
    }
    let mut images: Vec<Vec<f64>> = Vec::with_capacity(max_sub);
    let mut matvecs = 0;
    let mut last_residuals = vec![f64::INFINITY; nev];
    let mut last_values = vec![f64::NAN; nev];
    let mut shifted = None;
    let mut escalation_failed = false;

    for iteration in 1..=opts.max_iterations {
        while images.len() < basis.len() {
            let mut w = vec![0.0; n];
            op.apply(&basis[images.len()], &mut w);
            matvecs += 1;
            images.push(w);
        }
        let k = basis.len();
        let mut rayleigh = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in 0..=i {
                let v = 0.5 * (dot(&basis[i], &images[j]) + dot(&basis[j], &images[i]));
                rayleigh[(i, j)] = v;
                rayleigh[(j, i)] = v;
            }
        }
        let (theta, s) = eigensolve_symmetric_vectors(&rayleigh)?;
        let wanted = nev.min(k);

        let mut ritz = Vec::with_capacity(wanted);
        let mut residuals = Vec::with_capacity(wanted);
        for j in 0..wanted {
            let mut x = vec![0.0; n];
            let mut r = vec![0.0; n];
            for i in 0..k {
                let c = s[(i, j)];
                axpy(c, &basis[i], &mut x);
                axpy(c, &images[i], &mut r);
            }
            axpy(-theta[j], &x, &mut r);
            residuals.push(norm(&r));
            ritz.push((x, r));
        }
        last_values = theta[..wanted].to_vec();
        last_residuals = residuals.clone();

        if wanted == nev && residuals.iter().all(|&r| r <= tol) {
            return Ok(IterativeOutcome {
                values: last_values,
                residuals,
                iterations: iteration,
                matvecs,
            });
        }
        if k == n {
            // The search space is the whole space: Ritz values are exact.
            return Ok(IterativeOutcome {
                values: theta[..nev].to_vec(),
                residuals,
                iterations: iteration,
                matvecs,
            });
        }

        if shifted.is_none()
            && opts.escalate_after > 0
            && iteration >= opts.escalate_after
            && !escalation_failed
        {
            shifted = find_shift(op, &theta, &residuals, scale, opts.factor_budget_bytes);
            escalation_failed = shifted.is_none();
            match &shifted {
                Some((sigma, _)) => log::debug!(
                    "davidson: dim {n}, switching to shifted factorization at sigma {sigma:e}"
                ),
                None => log::debug!("davidson: dim {n}, no shifted factorization available"),
            }
        }

        let mut corrections = Vec::new();
        for (j, (_, r)) in ritz.iter().enumerate() {
            if residuals[j] <= tol {
                continue;
            }
            if let Some((_, inv)) = &shifted {
                let mut t = vec![0.0; n];
                inv.solve(r, &mut t);
                corrections.push(t);
                continue;
            }
            let t: Vec<f64> = r
                .iter()
                .zip(&diag)
                .map(|(ri, di)| {
                    let mut den = theta[j] - di;
                    let floor = 1e-8 * scale;
                    if den.abs() < floor {
                        den = if den < 0.0 { -floor } else { floor };
                    }
                    ri / den
                })
                .collect();
            corrections.push(t);
        }

        if basis.len() + corrections.len() > max_sub {
            // Thick restart on the lowest Ritz vectors.
            let keep = (nev + 2).min(k);
            let mut restarted: Vec<Vec<f64>> = Vec::with_capacity(max_sub);
            for j in 0..keep {
                let mut x = vec![0.0; n];
                for i in 0..k {
                    axpy(s[(i, j)], &basis[i], &mut x);
                }
                if orthonormalize_against(&restarted, &mut x) {
                    restarted.push(x);
                }
            }
            basis = restarted;
            images.clear();
            while images.len() < basis.len() {
                let mut w = vec![0.0; n];
                op.apply(&basis[images.len()], &mut w);
                matvecs += 1;
                images.push(w);
            }
        }

        let mut added = 0;
        for mut t in corrections {
            if orthonormalize_against(&basis, &mut t) {
                basis.push(t);
                added += 1;
            }
        }
        if added == 0 {
            // Preconditioned residuals lie inside the search space: fall back
            // to a fresh random direction rather than stalling.
            let mut r = random_unit(n, iteration as u64);
            if orthonormalize_against(&basis, &mut r) {
                basis.push(r);
            } else {
                break;
            }
        }
    }

    let worst = last_residuals.iter().copied().fold(0.0, f64::max);
    Err(GtbError::Numerical(format!(
        "Davidson did not converge after {} iterations ({matvecs} products): \
         dim {n}, worst residual {worst:e} vs tolerance {tol:e}, Ritz values {last_values:?}",
        opts.max_iterations
    )))
}

/// Looks for `σ` below the spectrum, starting just under the lowest Ritz
/// value and widening the margin until `H − σ` factors.
fn find_shift<'a, Op: SymmetricOperator + ?Sized>(
    op: &'a Op,
    theta: &[f64],
    residuals: &[f64],
    scale: f64,
    budget: usize,
) -> Option<(f64, Box<dyn ShiftedInverse + 'a>)> {
    let spread = if theta.len() > 1 {
        theta[1] - theta[0]
    } else {
        0.0
    };
    let mut margin = residuals[0].max(0.1 * spread).max(1e-10 * scale);
    while margin <= 4.0 * scale {
        let sigma = theta[0] - margin;
        match op.factor_shifted(sigma, budget) {
            Factorization::Ready(inv) => return Some((sigma, inv)),
            Factorization::NotPositive => margin *= 4.0,
            Factorization::Unavailable => return None,
        }
    }
    None
}

/// Lowest `nev` eigenvalues by Lanczos with full reorthogonalization.
///
/// A single start vector cannot resolve multiplicities: an exactly
/// degenerate eigenvalue is reported once. Use [`davidson`] when degeneracy
/// of the wanted values matters.
pub fn lanczos<Op: SymmetricOperator + ?Sized>(
    op: &Op,
    nev: usize,
    opts: &IterativeOptions,
) -> Result<IterativeOutcome> {
    let n = op.dim();
    check_request(n, nev)?;
    let scale = op.norm_bound().max(f64::MIN_POSITIVE);
    let tol = opts.residual_rtol * scale;
    let max_steps = opts.max_iterations.min(n);
    let check_every = 10;

    let mut q: Vec<Vec<f64>> = vec![random_unit(n, 0)];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut last_values = Vec::new();
    let mut last_residuals = Vec::new();

    for step in 0..max_steps {
        let mut w = vec![0.0; n];
        op.apply(&q[step], &mut w);
        let a = dot(&q[step], &w);
        alpha.push(a);
        axpy(-a, &q[step], &mut w);
        if step > 0 {
            axpy(-beta[step - 1], &q[step - 1], &mut w);
        }
        // Full reorthogonalization, twice.
        for _ in 0..2 {
            let coeffs: Vec<f64> = q.iter().map(|qi| dot(qi, &w)).collect();
            for (qi, c) in q.iter().zip(coeffs) {
                axpy(-c, qi, &mut w);
            }
        }
        let b = norm(&w);
        let m = alpha.len();
        let invariant = b <= 1e-14 * scale;
        let at_end = step + 1 == max_steps;

        if m >= nev && (m.is_multiple_of(check_every) || invariant || at_end) {
            let eig = tridiagonal_eigen(&alpha, &beta, true)?;
            let z = eig.vectors.as_ref().expect("vectors requested");
            last_values = eig.values[..nev].to_vec();
            last_residuals = (0..nev).map(|j| (b * z[(m - 1, j)]).abs()).collect();
            if invariant || last_residuals.iter().all(|&r| r <= tol) {
                return Ok(IterativeOutcome {
                    values: last_values,
                    residuals: last_residuals,
                    iterations: m,
                    matvecs: m,
                });
            }
        }
        if invariant {
            return Err(GtbError::Numerical(format!(
                "Lanczos hit an invariant subspace of dimension {m} < {nev} requested values"
            )));
        }
        beta.push(b);
        w.iter_mut().for_each(|x| *x /= b);
        q.push(w);
    }

    let worst = last_residuals.iter().copied().fold(0.0, f64::max);
    Err(GtbError::Numerical(format!(
        "Lanczos did not converge in {max_steps} steps: dim {n}, worst residual {worst:e} \
         vs tolerance {tol:e}, Ritz values {last_values:?}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_matrix(n: usize) -> DMatrix<f64> {
        // Diagonally dominant with a wide spectrum, like the Hamiltonians.
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = (i * i) as f64 / 7.0 + 0.3 * (i % 3) as f64;
            for j in (i + 1)..n {
                let v = 0.4 / (1.0 + (i + j) as f64) * if (i + j) % 2 == 1 { 1.0 } else { -0.5 };
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    #[test]
    fn davidson_and_lanczos_match_dense() {
        let m = test_matrix(120);
        let dense = crate::spectrum::eigensolve_symmetric(&m).unwrap();
        let opts = IterativeOptions::default();
        let dav = davidson(&m, 3, &opts).unwrap();
        let lan = lanczos(&m, 3, &opts).unwrap();
        for (j, d) in dense.iter().take(3).enumerate() {
            assert!((dav.values[j] - d).abs() < 1e-9, "{j}");
            assert!((lan.values[j] - d).abs() < 1e-9, "{j}");
        }
    }

    #[test]
    fn davidson_resolves_degenerate_pair() {
        let n = 40;
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = i as f64;
        }
        m[(2, 2)] = 1.0;
        let out = davidson(&m, 3, &IterativeOptions::default()).unwrap();
        assert_eq!(out.values, vec![0.0, 1.0, 1.0]);
    }

    #[test]
    fn bad_requests_are_rejected() {
        let m = test_matrix(5);
        assert!(davidson(&m, 0, &IterativeOptions::default()).is_err());
        assert!(lanczos(&m, 6, &IterativeOptions::default()).is_err());
    }

    #[test]
    fn non_convergence_is_reported() {
        let m = test_matrix(200);
        let opts = IterativeOptions {
            residual_rtol: 1e-14,
            max_iterations: 3,
            max_subspace: 48,
            ..IterativeOptions::default()
        };
        match lanczos(&m, 2, &opts) {
            Err(GtbError::Numerical(msg)) => assert!(msg.contains("residual")),
            other => panic!("expected numerical error, got {other:?}"),
        }
    }
}
