//! Shifted factorizations `(H − σ)⁻¹` used as a Davidson preconditioner.
//!
//! Ordered by Fock index, the real Hamiltonian is block tridiagonal: every
//! photon factor is banded (bandwidth 1 for `a + a†`, 2 once `(a + a†)²`
//! appears), so grouping that many Fock states per block leaves only nearest
//! neighbour couplings. A block Cholesky factorization of `H − σ` then costs
//! `O(N_p·N_m³)` and exists exactly when `σ` lies below the spectrum, which
//! doubles as a test that `σ` is a lower bound.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::hamiltonians::TensorHamiltonian;

/// Applies an approximate or exact `(H − σ)⁻¹`.
pub trait ShiftedInverse {
    fn solve(&self, rhs: &[f64], out: &mut [f64]);
}

pub enum Factorization<'a> {
    Ready(Box<dyn ShiftedInverse + 'a>),
    /// `H − σ` is not positive definite: `σ` is not below the spectrum.
    NotPositive,
    /// No factorization for this operator or it would exceed the byte budget.
    Unavailable,
}

/// Dense Cholesky of `M − σ`.
pub struct DenseShifted {
    chol: Cholesky<f64, nalgebra::Dyn>,
}

impl ShiftedInverse for DenseShifted {
    fn solve(&self, rhs: &[f64], out: &mut [f64]) {
        let x = self.chol.solve(&DVector::from_column_slice(rhs));
        out.copy_from_slice(x.as_slice());
    }
}

pub fn factor_dense(m: &DMatrix<f64>, sigma: f64, budget_bytes: usize) -> Factorization<'static> {
    let n = m.nrows();
    if n * n * 8 > budget_bytes {
        return Factorization::Unavailable;
    }
    let shifted = m - DMatrix::identity(n, n) * sigma;
    match Cholesky::new(shifted) {
        Some(chol) => Factorization::Ready(Box::new(DenseShifted { chol })),
        None => Factorization::NotPositive,
    }
}

/// One non-zero scalar of a photon factor inside a block coupling:
/// `coef · A_term` maps Fock slot `col` of the source block to slot `row`.
#[derive(Debug, Clone, Copy)]
struct Coupling {
    term: usize,
    row: usize,
    col: usize,
    coef: f64,
}

/// Block Cholesky factor of `H − σ` for a [`TensorHamiltonian`].
pub struct BlockTridiagonalShifted<'a> {
    op: &'a TensorHamiltonian,
    /// Fock states per block.
    width: usize,
    /// Lower Cholesky factors of the Schur complements, one per block.
    factors: Vec<DMatrix<f64>>,
    /// `couplings[j]`: entries of the block coupling `j` (rows) to `j + 1` (cols).
    couplings: Vec<Vec<Coupling>>,
}

fn photon_bandwidth(op: &TensorHamiltonian) -> usize {
    let mut w = 0;
    for (_, b) in op.terms() {
        for c in 0..b.ncols() {
            for r in 0..b.nrows() {
                if b[(r, c)] != 0.0 {
                    w = w.max(r.abs_diff(c));
                }
            }
        }
    }
    w.max(1)
}

impl<'a> BlockTridiagonalShifted<'a> {
    fn block_range(&self, j: usize) -> std::ops::Range<usize> {
        let np = self.op.n_photon();
        (j * self.width).min(np)..((j + 1) * self.width).min(np)
    }

    fn n_blocks(&self) -> usize {
        self.op.n_photon().div_ceil(self.width)
    }

    /// Dense block `Σ_t B_t[rows, cols] ⊗ A_t` with local index `slot·N_m + i`.
    fn dense_block(
        &self,
        rows: std::ops::Range<usize>,
        cols: std::ops::Range<usize>,
    ) -> DMatrix<f64> {
        let nm = self.op.n_matter();
        let mut out = DMatrix::zeros(rows.len() * nm, cols.len() * nm);
        for (a, b) in self.op.terms() {
            for (sr, k) in rows.clone().enumerate() {
                for (sc, l) in cols.clone().enumerate() {
                    let coef = b[(k, l)];
                    if coef == 0.0 {
                        continue;
                    }
                    let mut view = out.view_mut((sr * nm, sc * nm), (nm, nm));
                    view += a * coef;
                }
            }
        }
        out
    }

    fn couplings_between(&self, j: usize) -> Vec<Coupling> {
        let (rows, cols) = (self.block_range(j), self.block_range(j + 1));
        let mut out = Vec::new();
        for (t, (_, b)) in self.op.terms().iter().enumerate() {
            for (sr, k) in rows.clone().enumerate() {
                for (sc, l) in cols.clone().enumerate() {
                    let coef = b[(k, l)];
                    if coef != 0.0 {
                        out.push(Coupling {
                            term: t,
                            row: sr,
                            col: sc,
                            coef,
                        });
                    }
                }
            }
        }
        out
    }

    /// `out += E_j · x` (`transpose`: `out += E_jᵀ · x`).
    fn apply_coupling(&self, j: usize, x: &[f64], out: &mut [f64], transpose: bool) {
        let nm = self.op.n_matter();
        let terms = self.op.terms();
        for c in &self.couplings[j] {
            let a = &terms[c.term].0;
            let (src, dst) = if transpose {
                (c.row, c.col)
            } else {
                (c.col, c.row)
            };
            let xv = nalgebra::DVectorView::from_slice(&x[src * nm..(src + 1) * nm], nm);
            let mut ov =
                nalgebra::DVectorViewMut::from_slice(&mut out[dst * nm..(dst + 1) * nm], nm);
            if transpose {
                ov.gemv_tr(c.coef, a, &xv, 1.0);
            } else {
                ov.gemv(c.coef, a, &xv, 1.0);
            }
        }
    }

    pub fn factor(op: &'a TensorHamiltonian, sigma: f64, budget_bytes: usize) -> Factorization<'a> {
        let nm = op.n_matter();
        let np = op.n_photon();
        let width = photon_bandwidth(op).min(np);
        let bytes = np.div_ceil(width) * (width * nm).pow(2) * 8;
        if bytes > budget_bytes {
            return Factorization::Unavailable;
        }
        let mut me = Self {
            op,
            width,
            factors: Vec::new(),
            couplings: Vec::new(),
        };
        let nb = me.n_blocks();
        me.couplings = (0..nb.saturating_sub(1))
            .map(|j| me.couplings_between(j))
            .collect();
        let mut previous: Option<DMatrix<f64>> = None;
        for j in 0..nb {
            let range = me.block_range(j);
            let mut s = me.dense_block(range.clone(), range.clone());
            for i in 0..s.nrows() {
                s[(i, i)] -= sigma;
            }
            if let Some(l_prev) = &previous {
                // S_j −= Wᵀ W with W = L_{j−1}⁻¹ E_{j−1}.
                let e = me.dense_block(me.block_range(j - 1), range.clone());
                let w = match l_prev.solve_lower_triangular(&e) {
                    Some(w) => w,
                    None => return Factorization::NotPositive,
                };
                s.gemm_tr(-1.0, &w, &w, 1.0);
            }
            let l = match Cholesky::new(s) {
                Some(c) => c.unpack(),
                None => return Factorization::NotPositive,
            };
            if let Some(p) = previous.replace(l) {
                me.factors.push(p);
            }
        }
        me.factors.extend(previous);
        Factorization::Ready(Box::new(me))
    }
}

impl ShiftedInverse for BlockTridiagonalShifted<'_> {
    fn solve(&self, rhs: &[f64], out: &mut [f64]) {
        let nm = self.op.n_matter();
        let np = self.op.n_photon();
        let nb = self.n_blocks();
        // Gather into block order: global i·N_p + k ↦ (k − k₀)·N_m + i.
        let mut blocks: Vec<Vec<f64>> = (0..nb)
            .map(|j| {
                let range = self.block_range(j);
                let mut b = Vec::with_capacity(range.len() * nm);
                for k in range {
                    b.extend((0..nm).map(|i| rhs[i * np + k]));
                }
                b
            })
            .collect();

        // Forward: y_j = L_j⁻¹ (b_j − W_jᵀ y_{j−1}), W_jᵀ y = E_{j−1}ᵀ L_{j−1}⁻ᵀ y.
        for j in 0..nb {
            if j > 0 {
                let mut t = DVector::from_column_slice(&blocks[j - 1]);
                self.factors[j - 1].tr_solve_lower_triangular_mut(&mut t);
                let mut acc = vec![0.0; blocks[j].len()];
                self.apply_coupling(j - 1, t.as_slice(), &mut acc, true);
                for (b, a) in blocks[j].iter_mut().zip(acc) {
                    *b -= a;
                }
            }
            let mut v = DVector::from_column_slice(&blocks[j]);
            self.factors[j].solve_lower_triangular_mut(&mut v);
            blocks[j].copy_from_slice(v.as_slice());
        }
        // Backward: x_j = L_j⁻ᵀ (y_j − L_j⁻¹ E_j x_{j+1}).
        for j in (0..nb).rev() {
            let mut v = DVector::from_column_slice(&blocks[j]);
            if j + 1 < nb {
                let mut acc = vec![0.0; blocks[j].len()];
                self.apply_coupling(j, &blocks[j + 1], &mut acc, false);
                let mut t = DVector::from_vec(acc);
                self.factors[j].solve_lower_triangular_mut(&mut t);
                v -= t;
            }
            self.factors[j].tr_solve_lower_triangular_mut(&mut v);
            blocks[j].copy_from_slice(v.as_slice());
        }

        for (j, b) in blocks.iter().enumerate() {
            for (slot, k) in self.block_range(j).enumerate() {
                for i in 0..nm {
                    out[i * np + k] = b[slot * nm + i];
                }
            }
        }
    }
}
