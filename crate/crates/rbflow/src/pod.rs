//! Split proper orthogonal decomposition with supremizer stabilization.
//!
//! Velocity and pressure snapshots get separate Gramians in their natural
//! norms (the two fields differ by orders of magnitude, so a joint
//! decomposition would drown the velocity). Modes are energy-truncated at a
//! shared tolerance, reconstructed as snapshot combinations, renormalized,
//! and completed by one supremizer per pressure mode so the reduced saddle
//! point stays solvable.
//!
//! The block basis is `[velocity modes | pressure modes | supremizers]`, so
//! the total count is always `N = N_u + 2 N_p`.

use faer::prelude::*;
use faer::sparse::SparseColMat;

use crate::error::{Error, Result};
use crate::fem::{supremizer_rhs, AssembledOperators};
use crate::hifi::SnapshotSet;
use crate::sparse::{eliminate_dirichlet_triplets, quad_form, sp_from_triplets, CholSolver, Trip};

/// Snapshot Gramians in the velocity and pressure norms.
pub struct GramianPair {
    /// `G_u[i][j] = u_i^T X_u u_j`, N_S x N_S.
    pub g_u: Mat<f64>,
    /// `G_p[i][j] = p_i^T X_p p_j`, N_S x N_S.
    pub g_p: Mat<f64>,
}

/// Eigenpairs of a Gramian, eigenvalues descending; ties keep the
/// deterministic order of the underlying symmetric solver.
pub struct Eigensystem {
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector of `values[k]`.
    pub vectors: Mat<f64>,
}

/// Block basis of the reduced space with its provenance spectra.
pub struct ReducedBasis {
    /// V-orthonormal velocity modes, n_u x N_u.
    pub velocity_modes: Mat<f64>,
    /// Q-orthonormal pressure modes, n_p x N_p.
    pub pressure_modes: Mat<f64>,
    /// Supremizers, V-orthonormalized against the velocity modes, n_u x N_p.
    pub supremizers: Mat<f64>,
    /// Gramian spectra (descending), kept for reporting.
    pub lambda_u: Vec<f64>,
    pub lambda_p: Vec<f64>,
    /// Energy tolerance the truncation used.
    pub tol: f64,
}

/// Total basis count bookkeeping: velocity modes plus a pressure mode and a
/// supremizer per selected pressure eigenpair.
pub fn basis_total(n_velocity_modes: usize, n_pressure_modes: usize) -> usize {
    n_velocity_modes + 2 * n_pressure_modes
}

impl ReducedBasis {
    pub fn n_velocity(&self) -> usize {
        self.velocity_modes.ncols()
    }

    pub fn n_pressure(&self) -> usize {
        self.pressure_modes.ncols()
    }

    pub fn total(&self) -> usize {
        basis_total(self.n_velocity(), self.n_pressure())
    }

    /// Monolithic basis matrix, (n_u + n_p) x N, blocks in the order
    /// velocity modes, pressure modes, supremizers.
    pub fn monolithic(&self) -> Mat<f64> {
        let n_u = self.velocity_modes.nrows();
        let n_p = self.pressure_modes.nrows();
        let (nu_m, np_m) = (self.n_velocity(), self.n_pressure());
        Mat::from_fn(n_u + n_p, self.total(), |i, j| {
            if j < nu_m {
                if i < n_u {
                    self.velocity_modes[(i, j)]
                } else {
                    0.0
                }
            } else if j < nu_m + np_m {
                if i >= n_u {
                    self.pressure_modes[(i - n_u, j - nu_m)]
                } else {
                    0.0
                }
            } else if i < n_u {
                self.supremizers[(i, j - nu_m - np_m)]
            } else {
                0.0
            }
        })
    }
}

/// Snapshot Gramians `U^T X U` for both fields.
pub fn compute_gramians(
    snapshots: &SnapshotSet,
    x_u: &SparseColMat<usize, f64>,
    x_p: &SparseColMat<usize, f64>,
) -> Result<GramianPair> {
    if snapshots.u.nrows() != x_u.nrows() || snapshots.p.nrows() != x_p.nrows() {
        return Err(Error::invalid(format!(
            "snapshot rows ({}, {}) do not match norm matrices ({}, {})",
            snapshots.u.nrows(),
            snapshots.p.nrows(),
            x_u.nrows(),
            x_p.nrows()
        )));
    }
    let xu_u = x_u * &snapshots.u;
    let g_u = snapshots.u.transpose() * &xu_u;
    let xp_p = x_p * &snapshots.p;
    let g_p = snapshots.p.transpose() * &xp_p;
    Ok(GramianPair { g_u, g_p })
}

/// Symmetric eigendecomposition sorted to descending eigenvalues.
pub fn eigendecompose(g: &Mat<f64>) -> Eigensystem {
    let n = g.nrows();
    let eig = g
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("symmetric eigendecomposition cannot fail on finite input");
    // ascending from the solver; flip to descending
    let values: Vec<f64> = (0..n).map(|k| eig.S()[n - 1 - k]).collect();
    let vectors = Mat::from_fn(n, n, |i, k| eig.U()[(i, n - 1 - k)]);
    Eigensystem { values, vectors }
}

/// Smallest mode count reaching the energy fraction `1 - tol`.
pub fn select_modes(eigenvalues: &[f64], tol: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&tol) {
        return Err(Error::invalid(format!(
            "energy tolerance must lie in [0, 1), got {tol}"
        )));
    }
    let total: f64 = eigenvalues.iter().sum();
    if !(total > 0.0) {
        return Err(Error::invalid(
            "cannot select modes from an all-zero spectrum",
        ));
    }
    let mut cum = 0.0;
    for (k, &lambda) in eigenvalues.iter().enumerate() {
        cum += lambda;
        if cum / total >= 1.0 - tol {
            return Ok(k + 1);
        }
    }
    Ok(eigenvalues.len())
}

/// Reconstruct the first `n_select` modes as snapshot combinations weighted
/// by `1/lambda`, renormalized in the given norm, then polished by one
/// modified Gram-Schmidt sweep so pairwise orthonormality holds to 1e-12
/// regardless of spectrum conditioning.
pub fn reconstruct_modes(
    snapshot_cols: &Mat<f64>,
    eig: &Eigensystem,
    n_select: usize,
    norm_mat: &SparseColMat<usize, f64>,
) -> Result<Mat<f64>> {
    if n_select > eig.values.len() {
        return Err(Error::invalid(format!(
            "requested {n_select} modes from a spectrum of {}",
            eig.values.len()
        )));
    }
    let leading = *eig.values.first().unwrap_or(&0.0);
    let mut modes = Mat::zeros(snapshot_cols.nrows(), n_select);
    for j in 0..n_select {
        let lambda = eig.values[j];
        if lambda < 1e-14 * leading {
            return Err(Error::DegenerateMode {
                index: j,
                lambda,
                leading,
            });
        }
        let mut col: Col<f64> = snapshot_cols * eig.vectors.col(j).to_owned();
        col *= faer::Scale(1.0 / lambda);
        let norm = quad_form(norm_mat, &col, &col).max(0.0).sqrt();
        if !(norm > 0.0) {
            return Err(Error::DegenerateMode {
                index: j,
                lambda,
                leading,
            });
        }
        col *= faer::Scale(1.0 / norm);
        modes.col_mut(j).copy_from(&col);
    }
    // orthonormality polish; spans are untouched
    for j in 0..n_select {
        let mut col = modes.col(j).to_owned();
        for k in 0..j {
            let prev = modes.col(k).to_owned();
            let proj = quad_form(norm_mat, &prev, &col);
            col -= &prev * faer::Scale(proj);
        }
        let norm = quad_form(norm_mat, &col, &col).max(0.0).sqrt();
        if !(norm > 1e-12) {
            return Err(Error::DegenerateMode {
                index: j,
                lambda: eig.values[j],
                leading,
            });
        }
        col *= faer::Scale(1.0 / norm);
        modes.col_mut(j).copy_from(&col);
    }
    Ok(modes)
}

/// Velocity-norm matrix with inlet dofs eliminated, factorized; the Riesz
/// problems for supremizers and residual representers live in the
/// homogeneous-Dirichlet space.
pub fn constrained_velocity_norm_solver(ops: &AssembledOperators) -> Result<CholSolver> {
    let n_u = ops.space.n_u;
    let mut trips: Vec<Trip> = Vec::new();
    crate::sparse::push_block(&mut trips, &ops.x_u, 1.0, 0, 0);
    eliminate_dirichlet_triplets(&mut trips, &ops.space.dirichlet_mask[..n_u]);
    CholSolver::new(&sp_from_triplets(n_u, n_u, &trips))
}

/// Raw supremizers: for each pressure mode, the Riesz representer of its
/// divergence functional in the (constrained) velocity inner product.
/// Orthonormalization against the velocity block happens in [`build_basis`].
pub fn compute_supremizers(
    ops: &AssembledOperators,
    pressure_modes: &Mat<f64>,
) -> Result<Mat<f64>> {
    let n_u = ops.space.n_u;
    let chol = constrained_velocity_norm_solver(ops)?;
    let mut out = Mat::zeros(n_u, pressure_modes.ncols());
    for j in 0..pressure_modes.ncols() {
        let p = pressure_modes.col(j).to_owned();
        let mut rhs = supremizer_rhs(&ops.b, &p);
        crate::sparse::mask_col(&mut rhs, &ops.space.dirichlet_mask[..n_u]);
        let sigma = chol.solve(&rhs);
        out.col_mut(j).copy_from(&sigma);
    }
    Ok(out)
}

/// Orthonormalize `v` against the columns listed in `basis` under the norm
/// `x`, two passes; returns `None` when `v` is numerically in their span
/// (post-orthogonalization norm at or below 1e-10 of the original).
pub fn orthonormalize_against(
    x: &SparseColMat<usize, f64>,
    basis: &[Col<f64>],
    v: &Col<f64>,
) -> Option<Col<f64>> {
    let norm0 = quad_form(x, v, v).max(0.0).sqrt();
    if !(norm0 > 0.0) {
        return None;
    }
    let mut w = v.clone();
    for _pass in 0..2 {
        for b in basis {
            let proj = quad_form(x, b, &w);
            w -= b * faer::Scale(proj);
        }
    }
    let norm1 = quad_form(x, &w, &w).max(0.0).sqrt();
    if norm1 <= 1e-10 * norm0 {
        return None;
    }
    w *= faer::Scale(1.0 / norm1);
    Some(w)
}

/// Full POD pipeline: Gramians, eigendecompositions, shared-tolerance
/// truncation, mode reconstruction, supremizers, Gram-Schmidt.
pub fn build_basis(
    snapshots: &SnapshotSet,
    ops: &AssembledOperators,
    tol: f64,
) -> Result<ReducedBasis> {
    if snapshots.n_samples() == 0 {
        return Err(Error::invalid("cannot build a basis from zero snapshots"));
    }
    let gram = compute_gramians(snapshots, &ops.x_u, &ops.x_p)?;
    let eig_u = eigendecompose(&gram.g_u);
    let eig_p = eigendecompose(&gram.g_p);
    let lambda_u: Vec<f64> = eig_u.values.iter().map(|&l| l.max(0.0)).collect();
    let lambda_p: Vec<f64> = eig_p.values.iter().map(|&l| l.max(0.0)).collect();

    let n_u_modes = select_modes(&lambda_u, tol)?;
    // an all-zero pressure spectrum (pressure-free flow) selects no modes
    let n_p_modes = match select_modes(&lambda_p, tol) {
        Ok(n) => n,
        Err(Error::InvalidArgument(_)) => 0,
        Err(e) => return Err(e),
    };

    let velocity_modes = reconstruct_modes(&snapshots.u, &eig_u, n_u_modes, &ops.x_u)?;
    let pressure_modes = if n_p_modes > 0 {
        reconstruct_modes(&snapshots.p, &eig_p, n_p_modes, &ops.x_p)?
    } else {
        Mat::zeros(ops.space.n_p, 0)
    };

    let raw_supremizers = compute_supremizers(ops, &pressure_modes)?;
    let mut vel_block: Vec<Col<f64>> = (0..n_u_modes)
        .map(|j| velocity_modes.col(j).to_owned())
        .collect();
    let mut supremizers = Mat::zeros(ops.space.n_u, n_p_modes);
    for j in 0..n_p_modes {
        let sigma = raw_supremizers.col(j).to_owned();
        let ortho = orthonormalize_against(&ops.x_u, &vel_block, &sigma).ok_or(
            Error::DegenerateMode {
                index: n_u_modes + j,
                lambda: 0.0,
                leading: 1.0,
            },
        )?;
        supremizers.col_mut(j).copy_from(&ortho);
        vel_block.push(ortho);
    }

    Ok(ReducedBasis {
        velocity_modes,
        pressure_modes,
        supremizers,
        lambda_u,
        lambda_p,
        tol,
    })
}

/// Extend a basis so a given state is exactly representable: the velocity
/// joins the velocity block, the pressure joins the pressure block with a
/// fresh supremizer, all orthonormalized. Components already in the span are
/// skipped, so the `N = N_u + 2 N_p` bookkeeping is preserved either way.
///
/// Reduced trajectories are seeded at the recorded-window start; folding
/// that state into the basis makes the seed projection exact.
pub fn extend_with_state(
    basis: ReducedBasis,
    ops: &AssembledOperators,
    u0: &Col<f64>,
    p0: &Col<f64>,
) -> Result<ReducedBasis> {
    let n_u = ops.space.n_u;
    let n_p = ops.space.n_p;
    let mut vel: Vec<Col<f64>> = (0..basis.n_velocity())
        .map(|j| basis.velocity_modes.col(j).to_owned())
        .collect();
    let mut sup: Vec<Col<f64>> = (0..basis.n_pressure())
        .map(|j| basis.supremizers.col(j).to_owned())
        .collect();
    let mut prs: Vec<Col<f64>> = (0..basis.n_pressure())
        .map(|j| basis.pressure_modes.col(j).to_owned())
        .collect();

    let mut all_vel: Vec<Col<f64>> = vel.iter().chain(sup.iter()).cloned().collect();
    if let Some(u_new) = orthonormalize_against(&ops.x_u, &all_vel, u0) {
        all_vel.push(u_new.clone());
        vel.push(u_new);
    }
    if let Some(p_new) = orthonormalize_against(&ops.x_p, &prs, p0) {
        let raw = compute_supremizers(ops, &Mat::from_fn(n_p, 1, |i, _| p_new[i]))?;
        let s_new = orthonormalize_against(&ops.x_u, &all_vel, &raw.col(0).to_owned()).ok_or(
            Error::DegenerateMode {
                index: all_vel.len(),
                lambda: 0.0,
                leading: 1.0,
            },
        )?;
        prs.push(p_new);
        sup.push(s_new);
    }

    Ok(ReducedBasis {
        velocity_modes: Mat::from_fn(n_u, vel.len(), |i, j| vel[j][i]),
        pressure_modes: Mat::from_fn(n_p, prs.len(), |i, j| prs[j][i]),
        supremizers: Mat::from_fn(n_u, sup.len(), |i, j| sup[j][i]),
        lambda_u: basis.lambda_u,
        lambda_p: basis.lambda_p,
        tol: basis.tol,
    })
}

#[cfg(test)]
mod tests;
