//! Riesz-representer structures for online residual dual norms.
//!
//! The stepped residual is an exact linear combination of a fixed list of
//! full-space vectors: four state-independent loads, five blocks of per-mode
//! vectors, and one block of mode-pair convection vectors. The dual norm in
//! the block X-inner-product is then `sqrt(gamma^T G gamma)` where `gamma`
//! collects the combination coefficients (products of parameters and reduced
//! coefficients) and `G` is the Gram matrix of the Riesz representers,
//! computed offline with one sparse Cholesky factorization of the constrained
//! X matrix.
//!
//! Enrichment appends basis columns; the cache is extended by remapping the
//! old Gram entries into the grown layout and computing only the new-term
//! solves and cross products.

use faer::prelude::*;
use faer::sparse::SparseColMat;

use crate::affine::AffineSystem;
use crate::error::{Error, Result};
use crate::fem::AssembledOperators;
use crate::sparse::{eliminate_dirichlet_triplets, sp_from_triplets, CholSolver, Trip};

use super::{BasisKind, ReducedModel};

/// Identity of one residual term.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TermId {
    /// Fixed loads: 0 Neumann, 1 lifting mass, 2 lifting operator,
    /// 3 lifting self-advection, 4 window-start displacement stiffness.
    Fixed(usize),
    /// Previous-velocity mass on mode `j`.
    MTime(usize),
    /// Wall stiffness on mode `j` (displacement accumulator).
    KGamma(usize),
    /// Advection of the lifting by mode `i`.
    ConvLift(usize),
    /// Constant operator applied to mode `j`.
    A0Col(usize),
    /// Lifting advection applied to mode `j`.
    ConvLCol(usize),
    /// Mode-`i` advection applied to mode `j`.
    ConvPair(usize, usize),
}

/// Index layout of the residual terms for a given basis size.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct TermLayout {
    pub n_modes: usize,
}

impl TermLayout {
    pub const FIXED: usize = 5;

    pub fn total(&self) -> usize {
        Self::FIXED + 5 * self.n_modes + self.n_modes * self.n_modes
    }

    pub fn encode(&self, id: TermId) -> usize {
        let n = self.n_modes;
        match id {
            TermId::Fixed(k) => k,
            TermId::MTime(j) => Self::FIXED + j,
            TermId::KGamma(j) => Self::FIXED + n + j,
            TermId::ConvLift(i) => Self::FIXED + 2 * n + i,
            TermId::A0Col(j) => Self::FIXED + 3 * n + j,
            TermId::ConvLCol(j) => Self::FIXED + 4 * n + j,
            TermId::ConvPair(i, j) => Self::FIXED + 5 * n + i * n + j,
        }
    }

    pub fn decode(&self, q: usize) -> TermId {
        let n = self.n_modes;
        if q < Self::FIXED {
            return TermId::Fixed(q);
        }
        let r = q - Self::FIXED;
        if r < n {
            TermId::MTime(r)
        } else if r < 2 * n {
            TermId::KGamma(r - n)
        } else if r < 3 * n {
            TermId::ConvLift(r - 2 * n)
        } else if r < 4 * n {
            TermId::A0Col(r - 3 * n)
        } else if r < 5 * n {
            TermId::ConvLCol(r - 4 * n)
        } else {
            let p = r - 5 * n;
            TermId::ConvPair(p / n, p % n)
        }
    }
}

/// Online residual cache: the term layout and the representer Gram matrix.
pub struct RieszCache {
    pub layout: TermLayout,
    pub gram: Mat<f64>,
}

impl RieszCache {
    /// Combination coefficients of the residual terms for one step.
    pub fn gamma(
        &self,
        mu: &[f64; 4],
        c_prev: &Col<f64>,
        acc_prev: &Col<f64>,
        d0_weight: f64,
        c_curr: &Col<f64>,
    ) -> Col<f64> {
        let [mu0, mu1, mu2, mu3] = *mu;
        let n = self.layout.n_modes;
        let mut g = Col::zeros(self.layout.total());
        g[0] = mu1;
        g[1] = mu2 * mu3;
        g[2] = -(mu3 * mu0);
        g[3] = -(mu0 * mu2 * mu3 * mu3);
        g[4] = -d0_weight;
        let f = TermLayout::FIXED;
        for j in 0..n {
            g[f + j] = c_prev[j];
            g[f + n + j] = -acc_prev[j];
            g[f + 2 * n + j] = -(mu3 * mu0) * c_prev[j];
            g[f + 3 * n + j] = -c_curr[j];
            g[f + 4 * n + j] = -(mu2 * mu3) * c_curr[j];
        }
        for i in 0..n {
            if c_prev[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                g[f + 5 * n + i * n + j] = -c_prev[i] * c_curr[j];
            }
        }
        g
    }
}

/// Constrained block norm `diag(X_u, X_p)` with inlet dofs eliminated.
pub fn constrained_x_block(ops: &AssembledOperators) -> SparseColMat<usize, f64> {
    let n_u = ops.space.n_u;
    let n = ops.space.n_total();
    let mut trips: Vec<Trip> = Vec::new();
    crate::sparse::push_block(&mut trips, &ops.x_u, 1.0, 0, 0);
    crate::sparse::push_block(&mut trips, &ops.x_p, 1.0, n_u, n_u);
    eliminate_dirichlet_triplets(&mut trips, &ops.space.dirichlet_mask);
    sp_from_triplets(n, n, &trips)
}

fn masked(v: Col<f64>, mask: &[bool]) -> Col<f64> {
    Col::from_fn(v.nrows(), |i| if mask[i] { 0.0 } else { v[i] })
}

/// Term vector for one id, Dirichlet-masked. `conv` supplies the monolithic
/// per-mode advection matrices (None for pressure columns).
fn term_vector(
    sys: &AffineSystem,
    mask: &[bool],
    psi_col: impl Fn(usize) -> Col<f64>,
    conv: &[Option<SparseColMat<usize, f64>>],
    window_d0: &Col<f64>,
    id: TermId,
) -> Col<f64> {
    let n = sys.n;
    let n_u = sys.space.n_u;
    let v = match id {
        TermId::Fixed(4) => {
            let d0_full = Col::from_fn(n, |i| if i < n_u { window_d0[i] } else { 0.0 });
            &sys.k_gamma_full * &d0_full
        }
        TermId::Fixed(k) => sys.load_terms[k].vector.clone(),
        TermId::MTime(j) => &sys.m_time * &psi_col(j),
        TermId::KGamma(j) => &sys.k_gamma_full * &psi_col(j),
        TermId::ConvLift(i) => match &conv[i] {
            Some(c) => c * &sys.lift_full,
            None => Col::zeros(n),
        },
        TermId::A0Col(j) => &sys.operator_terms[0].matrix * &psi_col(j),
        TermId::ConvLCol(j) => &sys.operator_terms[1].matrix * &psi_col(j),
        TermId::ConvPair(i, j) => match &conv[i] {
            Some(c) => c * &psi_col(j),
            None => Col::zeros(n),
        },
    };
    masked(v, mask)
}

/// Offline cache construction: build all term vectors, solve the Riesz
/// problems against the constrained block norm, and form their Gram matrix.
pub fn build_cache(
    sys: &AffineSystem,
    ops: &AssembledOperators,
    psi: &Mat<f64>,
    kinds: &[BasisKind],
    conv: &[Option<SparseColMat<usize, f64>>],
    window_d0: &Col<f64>,
) -> Result<RieszCache> {
    let layout = TermLayout {
        n_modes: kinds.len(),
    };
    let t = layout.total();
    let n = sys.n;
    let mask = &ops.space.dirichlet_mask;
    let psi_col = |j: usize| psi.col(j).to_owned();

    let mut v = Mat::zeros(n, t);
    for q in 0..t {
        let col = term_vector(sys, mask, psi_col, conv, window_d0, layout.decode(q));
        v.col_mut(q).copy_from(&col);
    }

    let chol = CholSolver::new(&constrained_x_block(ops))?;
    let z = chol.solve_mat(&v);
    let gram = v.transpose() * &z;
    Ok(RieszCache { layout, gram })
}

/// Retained offline state that lets enrichment extend the cache without a
/// full rebuild: the norm factorization and the representer matrix.
pub struct RieszWorkspace {
    pub chol: CholSolver,
    /// Representers `X^{-1} V`, n x T, columns in layout order.
    pub z: Mat<f64>,
}

impl RieszWorkspace {
    /// Rebuild the representers for an existing model (used when a model was
    /// loaded from disk and is about to be enriched).
    pub fn build(
        model: &ReducedModel,
        ops: &AssembledOperators,
        sys: &AffineSystem,
    ) -> Result<RieszWorkspace> {
        let layout = model.riesz.layout;
        let n = sys.n;
        let mask = &ops.space.dirichlet_mask;
        let conv = assemble_mode_convections(model, sys, 0..model.n_modes())?;
        let psi_col = |j: usize| model.basis.col(j).to_owned();
        let mut v = Mat::zeros(n, layout.total());
        for q in 0..layout.total() {
            let col = term_vector(sys, mask, psi_col, &conv, &model.window_d0, layout.decode(q));
            v.col_mut(q).copy_from(&col);
        }
        let chol = CholSolver::new(&constrained_x_block(ops))?;
        let z = chol.solve_mat(&v);
        Ok(RieszWorkspace { chol, z })
    }
}

/// Monolithic advection matrices of the given basis columns.
fn assemble_mode_convections(
    model: &ReducedModel,
    sys: &AffineSystem,
    range: std::ops::Range<usize>,
) -> Result<Vec<Option<SparseColMat<usize, f64>>>> {
    let mut out = Vec::with_capacity(range.len());
    for i in range {
        if model.kinds[i] == BasisKind::Pressure {
            out.push(None);
        } else {
            out.push(Some(sys.convection_full(&model.velocity_part(i))?));
        }
    }
    Ok(out)
}

/// Append one basis column to the model, extending every projected structure
/// and the Riesz cache in place. Only the new term vectors are solved; old
/// Gram entries are remapped.
pub fn append_basis_column(
    model: &mut ReducedModel,
    ops: &AssembledOperators,
    sys: &AffineSystem,
    ws: &mut RieszWorkspace,
    col: &Col<f64>,
    kind: BasisKind,
) -> Result<()> {
    let n = sys.n;
    let n_old = model.n_modes();
    let j_new = n_old;
    if col.nrows() != n {
        return Err(Error::invalid("appended column has wrong dimension"));
    }
    for &d in &ops.space.dirichlet_dofs {
        if col[d].abs() > 1e-11 {
            return Err(Error::Data(format!(
                "appended basis column violates the inlet constraint at dof {d}"
            )));
        }
    }

    // grown basis
    let mut psi = Mat::zeros(n, n_old + 1);
    for j in 0..n_old {
        psi.col_mut(j).copy_from(&model.basis.col(j).to_owned());
    }
    psi.col_mut(j_new).copy_from(col);

    // per-mode advection matrices of the old columns (reassembled on demand)
    // and of the new one
    let mut conv = assemble_mode_convections(model, sys, 0..n_old)?;
    let conv_new = if kind == BasisKind::Pressure {
        None
    } else {
        let w = Col::from_fn(ops.space.n_u, |i| col[i]);
        Some(sys.convection_full(&w)?)
    };
    conv.push(conv_new);

    // extend the dense projections with the new row and column
    let a0 = &sys.operator_terms[0].matrix;
    let conv_l = &sys.operator_terms[1].matrix;
    let grow_mat = |old: &Mat<f64>, sp: &SparseColMat<usize, f64>| -> Mat<f64> {
        let sp_new = sp * col;
        let new_col: Col<f64> = psi.transpose() * &sp_new;
        let spt_new = spmv_t(sp, col);
        let new_row: Col<f64> = psi.transpose() * &spt_new;
        Mat::from_fn(n_old + 1, n_old + 1, |i, j| {
            if j == j_new {
                new_col[i]
            } else if i == j_new {
                new_row[j]
            } else {
                old[(i, j)]
            }
        })
    };
    model.a0_n = grow_mat(&model.a0_n, a0);
    model.conv_lift_n = grow_mat(&model.conv_lift_n, conv_l);
    model.m_time_n = grow_mat(&model.m_time_n, &sys.m_time);
    model.k_gamma_n = grow_mat(&model.k_gamma_n, &sys.k_gamma_full);

    // convection blocks: grow the existing per-mode matrices, then project
    // the new mode's matrix onto the grown basis
    let mut conv_n_new: Vec<Option<Mat<f64>>> = Vec::with_capacity(n_old + 1);
    let mut conv_lift_vec_new: Vec<Option<Col<f64>>> = Vec::with_capacity(n_old + 1);
    for i in 0..n_old {
        match (&model.conv_n[i], &conv[i]) {
            (Some(old), Some(sp)) => {
                conv_n_new.push(Some(grow_mat(old, sp)));
                let old_vec = model.conv_lift_vec_n[i].as_ref().expect("kind mismatch");
                let lift_vec = sp * &sys.lift_full;
                let mut v = Col::zeros(n_old + 1);
                for k in 0..n_old {
                    v[k] = old_vec[k];
                }
                v[j_new] = crate::sparse::dot(col, &lift_vec);
                conv_lift_vec_new.push(Some(v));
            }
            (None, None) => {
                conv_n_new.push(None);
                conv_lift_vec_new.push(None);
            }
            _ => return Err(Error::Data("convection cache out of sync".into())),
        }
    }
    match &conv[j_new] {
        Some(sp) => {
            let sp_psi = sp * &psi;
            conv_n_new.push(Some(psi.transpose() * &sp_psi));
            conv_lift_vec_new.push(Some(psi.transpose() * &(sp * &sys.lift_full)));
        }
        None => {
            conv_n_new.push(None);
            conv_lift_vec_new.push(None);
        }
    }
    model.conv_n = conv_n_new;
    model.conv_lift_vec_n = conv_lift_vec_new;

    // projected loads gain one entry each
    let grow_vec = |old: &Col<f64>, full: &Col<f64>| -> Col<f64> {
        let mut v = Col::zeros(n_old + 1);
        for k in 0..n_old {
            v[k] = old[k];
        }
        v[j_new] = crate::sparse::dot(col, full);
        v
    };
    model.f_n_n = grow_vec(&model.f_n_n, &sys.load_terms[0].vector);
    model.m_lift_n = grow_vec(&model.m_lift_n, &sys.load_terms[1].vector);
    model.a0_lift_n = grow_vec(&model.a0_lift_n, &sys.load_terms[2].vector);
    model.conv_ll_n = grow_vec(&model.conv_ll_n, &sys.load_terms[3].vector);
    let xu_lift_full = {
        let xu_lift = &ops.x_u * &ops.lift;
        Col::from_fn(n, |i| if i < ops.space.n_u { xu_lift[i] } else { 0.0 })
    };
    model.lift_proj = grow_vec(&model.lift_proj, &xu_lift_full);
    let d0_term = {
        let d0_full = Col::from_fn(n, |i| {
            if i < ops.space.n_u {
                model.window_d0[i]
            } else {
                0.0
            }
        });
        &sys.k_gamma_full * &d0_full
    };
    model.d0_load_n = grow_vec(&model.d0_load_n, &d0_term);

    // Riesz cache extension
    let old_layout = model.riesz.layout;
    let new_layout = TermLayout { n_modes: n_old + 1 };
    let t_old = old_layout.total();
    let t_new = new_layout.total();
    let mask = &ops.space.dirichlet_mask;
    let psi_col = |j: usize| psi.col(j).to_owned();

    // identify the genuinely new term ids
    let mut new_ids = vec![
        TermId::MTime(j_new),
        TermId::KGamma(j_new),
        TermId::ConvLift(j_new),
        TermId::A0Col(j_new),
        TermId::ConvLCol(j_new),
    ];
    for i in 0..=j_new {
        new_ids.push(TermId::ConvPair(i, j_new));
    }
    for j in 0..j_new {
        new_ids.push(TermId::ConvPair(j_new, j));
    }

    let mut v_new = Mat::zeros(n, new_ids.len());
    for (k, id) in new_ids.iter().enumerate() {
        let colv = term_vector(sys, mask, psi_col, &conv, &model.window_d0, *id);
        v_new.col_mut(k).copy_from(&colv);
    }
    let z_new = ws.chol.solve_mat(&v_new);

    // cross Gram blocks: old representers against new term vectors
    let cross: Mat<f64> = ws.z.transpose() * &v_new; // t_old x k_new
    let diag: Mat<f64> = v_new.transpose() * &z_new; // k_new x k_new

    let mut gram = Mat::zeros(t_new, t_new);
    let mut z = Mat::zeros(n, t_new);
    let mut remap = vec![usize::MAX; t_old];
    for q in 0..t_old {
        remap[q] = new_layout.encode(old_layout.decode(q));
    }
    for q in 0..t_old {
        for r in 0..t_old {
            gram[(remap[q], remap[r])] = model.riesz.gram[(q, r)];
        }
        z.col_mut(remap[q]).copy_from(&ws.z.col(q).to_owned());
    }
    for (k, id) in new_ids.iter().enumerate() {
        let qn = new_layout.encode(*id);
        for q in 0..t_old {
            gram[(remap[q], qn)] = cross[(q, k)];
            gram[(qn, remap[q])] = cross[(q, k)];
        }
        for (l, id2) in new_ids.iter().enumerate() {
            gram[(qn, new_layout.encode(*id2))] = diag[(k, l)];
        }
        z.col_mut(qn).copy_from(&z_new.col(k).to_owned());
    }

    model.riesz = RieszCache {
        layout: new_layout,
        gram,
    };
    ws.z = z;
    model.basis = psi;
    model.kinds.push(kind);
    match kind {
        BasisKind::Velocity => model.n_velocity += 1,
        BasisKind::Pressure => model.n_pressure += 1,
        BasisKind::Supremizer => model.n_supremizer += 1,
    }
    Ok(())
}

/// Transposed sparse matrix-vector product.
fn spmv_t(sp: &SparseColMat<usize, f64>, x: &Col<f64>) -> Col<f64> {
    let mut out = Col::zeros(sp.ncols());
    crate::sparse::for_each_entry(sp, |i, j, v| out[j] += v * x[i]);
    out
}
