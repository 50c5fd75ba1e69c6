//! Thin helpers around `faer` sparse matrices: triplet assembly, block
//! embedding, Dirichlet elimination, and factorized solver wrappers.
//!
//! Assembly produces plain `(row, col, value)` triplets; duplicates are summed
//! when the compressed matrix is built. All solves are sparse direct
//! factorizations, which keeps the pipeline deterministic at desk scale.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};

use crate::error::{Error, Result};

/// Internal triplet alias: (row, col, value).
pub type Trip = (usize, usize, f64);

/// Build a compressed sparse matrix from triplets (duplicates are summed).
pub fn sp_from_triplets(nrows: usize, ncols: usize, trips: &[Trip]) -> SparseColMat<usize, f64> {
    let t: Vec<Triplet<usize, usize, f64>> = trips
        .iter()
        .map(|&(r, c, v)| Triplet::new(r, c, v))
        .collect();
    SparseColMat::try_new_from_triplets(nrows, ncols, &t)
        .expect("triplet indices must be in bounds")
}

/// Visit every stored entry of a compressed matrix.
pub fn for_each_entry(sp: &SparseColMat<usize, f64>, mut f: impl FnMut(usize, usize, f64)) {
    let sym = sp.symbolic();
    let vals = sp.val();
    for j in 0..sp.ncols() {
        let range = sym.col_range(j);
        for (k, &i) in sym.row_idx_of_col_raw(j).iter().enumerate() {
            f(i, j, vals[range.start + k]);
        }
    }
}

/// Append `scale * sp` into `dst`, offset to a block position.
pub fn push_block(
    dst: &mut Vec<Trip>,
    sp: &SparseColMat<usize, f64>,
    scale: f64,
    row_off: usize,
    col_off: usize,
) {
    for_each_entry(sp, |i, j, v| dst.push((i + row_off, j + col_off, scale * v)));
}

/// Append `scale * sp^T` into `dst`, offset to a block position.
pub fn push_block_transposed(
    dst: &mut Vec<Trip>,
    sp: &SparseColMat<usize, f64>,
    scale: f64,
    row_off: usize,
    col_off: usize,
) {
    for_each_entry(sp, |i, j, v| dst.push((j + row_off, i + col_off, scale * v)));
}

/// Symmetric Dirichlet elimination on triplets: drop rows and columns of
/// constrained dofs and put a unit diagonal there. With a homogeneous
/// constrained value no load correction is needed; for the general case the
/// caller subtracts `A[:, d] * value` from the load before masking.
pub fn eliminate_dirichlet_triplets(trips: &mut Vec<Trip>, constrained: &[bool]) {
    trips.retain(|&(r, c, _)| !constrained[r] && !constrained[c]);
    for (d, &on) in constrained.iter().enumerate() {
        if on {
            trips.push((d, d, 1.0));
        }
    }
}

/// Zero the entries of `v` at constrained dofs.
pub fn mask_col(v: &mut Col<f64>, constrained: &[bool]) {
    for (d, &on) in constrained.iter().enumerate() {
        if on {
            v[d] = 0.0;
        }
    }
}

/// Returns a copy of `v` with constrained dofs zeroed.
pub fn masked(v: &Col<f64>, constrained: &[bool]) -> Col<f64> {
    let mut out = v.clone();
    mask_col(&mut out, constrained);
    out
}

/// Matrix-vector product.
pub fn spmv(sp: &SparseColMat<usize, f64>, v: &Col<f64>) -> Col<f64> {
    sp * v
}

/// Quadratic form v^T A w for sparse symmetric or general A.
pub fn quad_form(sp: &SparseColMat<usize, f64>, v: &Col<f64>, w: &Col<f64>) -> f64 {
    let aw = sp * w;
    let mut s = 0.0;
    for i in 0..v.nrows() {
        s += v[i] * aw[i];
    }
    s
}

pub fn dot(a: &Col<f64>, b: &Col<f64>) -> f64 {
    let mut s = 0.0;
    for i in 0..a.nrows() {
        s += a[i] * b[i];
    }
    s
}

/// Largest absolute entry difference between two sparse matrices.
pub fn sp_max_abs_diff(a: &SparseColMat<usize, f64>, b: &SparseColMat<usize, f64>) -> f64 {
    let mut entries = std::collections::HashMap::new();
    for_each_entry(a, |i, j, v| {
        *entries.entry((i, j)).or_insert(0.0) += v;
    });
    for_each_entry(b, |i, j, v| {
        *entries.entry((i, j)).or_insert(0.0) -= v;
    });
    entries.values().fold(0.0f64, |m, &v| m.max(v.abs()))
}

/// Largest absolute entry of a sparse matrix.
pub fn sp_max_abs(a: &SparseColMat<usize, f64>) -> f64 {
    let mut m = 0.0f64;
    for_each_entry(a, |_, _, v| m = m.max(v.abs()));
    m
}

/// Sparse LU with a post-solve residual check; direct solvers do not iterate,
/// so a large residual signals a (numerically) singular system.
pub struct LuSolver {
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
    mat: SparseColMat<usize, f64>,
}

impl LuSolver {
    pub fn new(mat: SparseColMat<usize, f64>) -> Result<Self> {
        let lu = mat.sp_lu().map_err(|e| Error::Solver {
            step: None,
            detail: format!("sparse LU factorization failed: {e:?}"),
        })?;
        Ok(LuSolver { lu, mat })
    }

    pub fn solve(&self, rhs: &Col<f64>) -> Result<Col<f64>> {
        let x: Col<f64> = self.lu.solve(rhs);
        let r = rhs - &self.mat * &x;
        let scale = rhs.norm_l2().max(x.norm_l2()).max(1.0);
        let res = r.norm_l2() / scale;
        if !res.is_finite() || res > 1e-7 {
            return Err(Error::Solver {
                step: None,
                detail: format!("direct solve residual {res:.3e} exceeds 1e-7"),
            });
        }
        Ok(x)
    }
}

/// Sparse Cholesky for symmetric positive definite norm matrices.
pub struct CholSolver {
    ch: faer::sparse::linalg::solvers::Llt<usize, f64>,
}

impl CholSolver {
    pub fn new(mat: &SparseColMat<usize, f64>) -> Result<Self> {
        let ch = mat.sp_cholesky(faer::Side::Lower).map_err(|e| Error::Solver {
            step: None,
            detail: format!("sparse Cholesky failed (matrix not SPD?): {e:?}"),
        })?;
        Ok(CholSolver { ch })
    }

    pub fn solve(&self, rhs: &Col<f64>) -> Col<f64> {
        self.ch.solve(rhs)
    }

    pub fn solve_mat(&self, rhs: &Mat<f64>) -> Mat<f64> {
        self.ch.solve(rhs)
    }
}
