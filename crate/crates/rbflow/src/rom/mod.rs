//! Galerkin projection onto the reduced basis, the online time stepper, the
//! intermediate full-space solve, and residual dual norms from cached Riesz
//! representers.
//!
//! Everything the online stepper touches is dense and sized by the basis
//! count N: the projected operator pieces, the per-mode convection matrices
//! (the advection field is a basis combination, so its matrix is too), and
//! the Riesz Gram matrix whose quadratic form evaluates the residual dual
//! norm without ever assembling a full-space vector.
//!
//! Basis columns are stored append-only, tagged by block kind; enrichment
//! extends the projections and the Riesz cache in place instead of
//! rebuilding them.

mod riesz;

pub use riesz::{append_basis_column, constrained_x_block, RieszCache, RieszWorkspace, TermLayout};

use std::sync::Arc;

use faer::prelude::*;

use crate::affine::{make_parameter_at, AffineSystem, FullPrev, ParameterVector};
use crate::error::{Error, Result};
use crate::fem::{AssembledOperators, BoundaryData, PhysicalParams};
use crate::hifi::State;
use crate::pod::ReducedBasis;
use crate::sparse::{dot, eliminate_dirichlet_triplets, mask_col, sp_from_triplets, LuSolver};

/// Which block of the final basis a column belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum BasisKind {
    Velocity,
    Pressure,
    Supremizer,
}

/// Reduced-space state: coefficients, the displacement-load accumulator
/// (reduced analogue of the wall displacement running sum), time, and step.
#[derive(Clone, Debug)]
pub struct ReducedState {
    pub c: Col<f64>,
    pub acc: Col<f64>,
    /// Weight of the stored window-start displacement load: 1 for runs
    /// seeded at the recorded window, 0 for cold starts.
    pub d0_weight: f64,
    pub t: f64,
    pub n: usize,
}

impl ReducedState {
    pub fn zero(n: usize) -> ReducedState {
        ReducedState {
            c: Col::zeros(n),
            acc: Col::zeros(n),
            d0_weight: 0.0,
            t: 0.0,
            n: 0,
        }
    }
}

/// Projected operators, loads, and Riesz structures of the reduced problem.
pub struct ReducedModel {
    pub space: Arc<crate::fem::FunctionSpace>,
    pub params: PhysicalParams,
    /// Monolithic basis columns, (n_u + n_p) x N, zero at inlet dofs.
    pub basis: Mat<f64>,
    /// Block kind of each column.
    pub kinds: Vec<BasisKind>,
    /// Projected constant operator.
    pub a0_n: Mat<f64>,
    /// Projected lifting-advection operator.
    pub conv_lift_n: Mat<f64>,
    /// Projected previous-velocity mass carry-over.
    pub m_time_n: Mat<f64>,
    /// Projected wall stiffness (applied to the displacement accumulator).
    pub k_gamma_n: Mat<f64>,
    /// Projected per-mode convection matrices; `None` for pressure columns
    /// whose velocity block is zero.
    pub conv_n: Vec<Option<Mat<f64>>>,
    /// Projected per-mode advection of the lifting.
    pub conv_lift_vec_n: Vec<Option<Col<f64>>>,
    /// Projected fixed loads.
    pub f_n_n: Col<f64>,
    pub m_lift_n: Col<f64>,
    pub a0_lift_n: Col<f64>,
    pub conv_ll_n: Col<f64>,
    /// X-projection coefficients of the lifting field; seeds the reduced
    /// initial condition when the signals do not start at zero.
    pub lift_proj: Col<f64>,
    /// Wall displacement at the recorded-window start (length n_u); its
    /// stiffness load is carried exactly as a fixed term.
    pub window_d0: Col<f64>,
    /// Projected window-start displacement load `Psi^T K_Gamma d0`.
    pub d0_load_n: Col<f64>,
    /// Riesz Gram cache for online residual dual norms.
    pub riesz: RieszCache,
    /// Hash of the mesh the model was projected on.
    pub mesh_hash: u64,
    /// Energy tolerance of the POD that seeded the basis.
    pub pod_tol: f64,
    /// Block counts of the seeding basis plus any enrichment.
    pub n_velocity: usize,
    pub n_pressure: usize,
    pub n_supremizer: usize,
}

impl ReducedModel {
    /// Number of basis columns.
    pub fn n_modes(&self) -> usize {
        self.kinds.len()
    }

    /// Velocity block of basis column `j` (length n_u).
    pub fn velocity_part(&self, j: usize) -> Col<f64> {
        Col::from_fn(self.space.n_u, |i| self.basis[(i, j)])
    }

    /// Reconstruct homogenized velocity and pressure from coefficients.
    pub fn reconstruct(&self, c: &Col<f64>) -> (Col<f64>, Col<f64>) {
        let full: Col<f64> = &self.basis * c;
        let n_u = self.space.n_u;
        (
            Col::from_fn(n_u, |i| full[i]),
            Col::from_fn(self.space.n_p, |i| full[n_u + i]),
        )
    }

    /// Coefficients of the X-orthogonal projection of a full-space state
    /// onto the reduced space (the basis is X-orthonormal by construction).
    pub fn project_state(
        &self,
        ops: &AssembledOperators,
        u_tilde: &Col<f64>,
        p: &Col<f64>,
    ) -> Col<f64> {
        let xu_u = &ops.x_u * u_tilde;
        let xp_p = &ops.x_p * p;
        let n_u = self.space.n_u;
        Col::from_fn(self.n_modes(), |j| {
            let mut s = 0.0;
            for i in 0..n_u {
                s += self.basis[(i, j)] * xu_u[i];
            }
            for i in 0..self.space.n_p {
                s += self.basis[(n_u + i, j)] * xp_p[i];
            }
            s
        })
    }

    /// Dense reduced operator at the given parameters and previous state.
    pub fn reduced_operator(&self, mu: &ParameterVector, c_prev: &Col<f64>) -> Mat<f64> {
        let mut a = self.a0_n.clone();
        let cl = mu.mu2 * mu.mu3;
        a += &self.conv_lift_n * faer::Scale(cl);
        for (i, conv) in self.conv_n.iter().enumerate() {
            if let Some(m) = conv {
                if c_prev[i] != 0.0 {
                    a += m * faer::Scale(c_prev[i]);
                }
            }
        }
        a
    }

    /// Dense reduced load at the given parameters and previous state.
    pub fn reduced_load(&self, mu: &ParameterVector, prev: &ReducedState) -> Col<f64> {
        let mut f = &self.f_n_n * faer::Scale(mu.mu1);
        f += &self.m_lift_n * faer::Scale(mu.mu2 * mu.mu3);
        f += &self.m_time_n * &prev.c;
        f -= &self.k_gamma_n * &prev.acc;
        if prev.d0_weight != 0.0 {
            f -= &self.d0_load_n * faer::Scale(prev.d0_weight);
        }
        let s = mu.mu3 * mu.mu0;
        f -= &self.a0_lift_n * faer::Scale(s);
        for (i, v) in self.conv_lift_vec_n.iter().enumerate() {
            if let Some(v) = v {
                if prev.c[i] != 0.0 {
                    f -= v * faer::Scale(s * prev.c[i]);
                }
            }
        }
        f -= &self.conv_ll_n * faer::Scale(mu.mu0 * mu.mu2 * mu.mu3 * mu.mu3);
        f
    }
}

/// Project the affine system onto a POD basis and precompute the Riesz Gram
/// cache for online residual evaluation. The window-start displacement is
/// taken as zero; use [`project_with_window`] when trajectories will be
/// seeded at a recorded window.
pub fn project(
    sys: &AffineSystem,
    ops: &AssembledOperators,
    basis: &ReducedBasis,
) -> Result<ReducedModel> {
    let d0 = Col::zeros(ops.space.n_u);
    project_with_window(sys, ops, basis, &d0)
}

/// [`project`] carrying the wall displacement at the recorded-window start,
/// whose stiffness load enters the reduced equations and the residual cache
/// as one exact fixed term.
pub fn project_with_window(
    sys: &AffineSystem,
    ops: &AssembledOperators,
    basis: &ReducedBasis,
    window_d0: &Col<f64>,
) -> Result<ReducedModel> {
    let psi = basis.monolithic();
    let mut kinds = Vec::with_capacity(basis.total());
    kinds.extend(std::iter::repeat(BasisKind::Velocity).take(basis.n_velocity()));
    kinds.extend(std::iter::repeat(BasisKind::Pressure).take(basis.n_pressure()));
    kinds.extend(std::iter::repeat(BasisKind::Supremizer).take(basis.n_pressure()));
    project_columns(sys, ops, psi, kinds, basis.tol, window_d0.clone())
}

/// Projection from explicit monolithic columns; enrichment re-enters here
/// for its appended columns via [`RieszWorkspace`].
pub(crate) fn project_columns(
    sys: &AffineSystem,
    ops: &AssembledOperators,
    psi: Mat<f64>,
    kinds: Vec<BasisKind>,
    pod_tol: f64,
    window_d0: Col<f64>,
) -> Result<ReducedModel> {
    if window_d0.nrows() != ops.space.n_u {
        return Err(Error::invalid("window displacement has wrong dimension"));
    }
    let n = sys.n;
    let n_modes = kinds.len();
    if psi.nrows() != n || psi.ncols() != n_modes {
        return Err(Error::invalid("basis shape does not match the system"));
    }
    // basis functions must live in the homogeneous-Dirichlet space
    for j in 0..n_modes {
        for &d in &ops.space.dirichlet_dofs {
            if psi[(d, j)].abs() > 1e-11 {
                return Err(Error::Data(format!(
                    "basis column {j} violates the inlet constraint at dof {d}"
                )));
            }
        }
    }

    let proj_mat = |sp: &faer::sparse::SparseColMat<usize, f64>| -> Mat<f64> {
        let sp_psi = sp * &psi;
        psi.transpose() * &sp_psi
    };
    let proj_vec = |v: &Col<f64>| -> Col<f64> { psi.transpose() * v };

    let a0 = &sys.operator_terms[0].matrix;
    let conv_lift = &sys.operator_terms[1].matrix;
    let a0_n = proj_mat(a0);
    let conv_lift_n = proj_mat(conv_lift);
    let m_time_n = proj_mat(&sys.m_time);
    let k_gamma_n = proj_mat(&sys.k_gamma_full);

    let mut conv_n: Vec<Option<Mat<f64>>> = Vec::with_capacity(n_modes);
    let mut conv_lift_vec_n: Vec<Option<Col<f64>>> = Vec::with_capacity(n_modes);
    let mut conv_sparse = Vec::with_capacity(n_modes);
    for (j, kind) in kinds.iter().enumerate() {
        if *kind == BasisKind::Pressure {
            conv_n.push(None);
            conv_lift_vec_n.push(None);
            conv_sparse.push(None);
            continue;
        }
        let w = Col::from_fn(ops.space.n_u, |i| psi[(i, j)]);
        let c_full = sys.convection_full(&w)?;
        conv_n.push(Some(proj_mat(&c_full)));
        conv_lift_vec_n.push(Some(proj_vec(&(&c_full * &sys.lift_full))));
        conv_sparse.push(Some(c_full));
    }

    let f_n_n = proj_vec(&sys.load_terms[0].vector);
    let m_lift_n = proj_vec(&sys.load_terms[1].vector);
    let a0_lift_n = proj_vec(&sys.load_terms[2].vector);
    let conv_ll_n = proj_vec(&sys.load_terms[3].vector);

    // X-projection of the lifting (the basis is X-orthonormal, so the
    // coefficients are plain X-inner products)
    let xu_lift = &ops.x_u * &ops.lift;
    let lift_proj = Col::from_fn(n_modes, |j| {
        let mut s = 0.0;
        for i in 0..ops.space.n_u {
            s += psi[(i, j)] * xu_lift[i];
        }
        s
    });

    // projected window-start displacement load
    let d0_full = Col::from_fn(n, |i| if i < ops.space.n_u { window_d0[i] } else { 0.0 });
    let d0_load_n = proj_vec(&(&sys.k_gamma_full * &d0_full));

    let riesz = riesz::build_cache(sys, ops, &psi, &kinds, &conv_sparse, &window_d0)?;

    let n_velocity = kinds.iter().filter(|k| **k == BasisKind::Velocity).count();
    let n_pressure = kinds.iter().filter(|k| **k == BasisKind::Pressure).count();
    let n_supremizer = kinds
        .iter()
        .filter(|k| **k == BasisKind::Supremizer)
        .count();

    Ok(ReducedModel {
        space: ops.space.clone(),
        params: ops.params,
        basis: psi,
        kinds,
        a0_n,
        conv_lift_n,
        m_time_n,
        k_gamma_n,
        conv_n,
        conv_lift_vec_n,
        f_n_n,
        m_lift_n,
        a0_lift_n,
        conv_ll_n,
        lift_proj,
        window_d0,
        d0_load_n,
        riesz,
        mesh_hash: ops.space.mesh.content_hash(),
        pod_tol,
        n_velocity,
        n_pressure,
        n_supremizer,
    })
}

/// One dense reduced step.
pub fn step_reduced(
    model: &ReducedModel,
    state: &ReducedState,
    mu: ParameterVector,
) -> Result<ReducedState> {
    let a = model.reduced_operator(&mu, &state.c);
    let f = model.reduced_load(&mu, state);
    let lu = a.partial_piv_lu();
    let c: Col<f64> = lu.solve(&f);
    // a direct dense solve only fails by producing garbage; check it
    let res = (&a * &c - &f).norm_l2();
    let scale = f.norm_l2().max(c.norm_l2()).max(1e-300);
    if !c.norm_l2().is_finite() || res > 1e-6 * scale {
        return Err(Error::SingularReducedMatrix { step: state.n });
    }
    let acc = &state.acc + &c * faer::Scale(model.params.dt);
    Ok(ReducedState {
        c,
        acc,
        d0_weight: state.d0_weight,
        t: state.t + model.params.dt,
        n: state.n + 1,
    })
}

/// Online residual dual norm for the step `previous -> current` at `mu`.
pub fn residual_dual_norm(
    model: &ReducedModel,
    previous: &ReducedState,
    current: &ReducedState,
    mu: &ParameterVector,
) -> f64 {
    let gamma = model.riesz.gamma(
        &mu_tuple(mu),
        &previous.c,
        &previous.acc,
        previous.d0_weight,
        &current.c,
    );
    let g_gamma = &model.riesz.gram * &gamma;
    dot(&gamma, &g_gamma).max(0.0).sqrt()
}

/// Batched dual norms for a stepped trajectory (one Gram multiply for all
/// steps instead of one per step).
pub fn residual_dual_norms_batch(
    model: &ReducedModel,
    steps: &[(ReducedState, ReducedState, ParameterVector)],
) -> Vec<f64> {
    let t = model.riesz.layout.total();
    let mut gammas = Mat::zeros(t, steps.len());
    for (k, (prev, curr, mu)) in steps.iter().enumerate() {
        let g = model
            .riesz
            .gamma(&mu_tuple(mu), &prev.c, &prev.acc, prev.d0_weight, &curr.c);
        gammas.col_mut(k).copy_from(&g);
    }
    let gg = &model.riesz.gram * &gammas;
    (0..steps.len())
        .map(|k| {
            let mut s = 0.0;
            for q in 0..t {
                s += gammas[(q, k)] * gg[(q, k)];
            }
            s.max(0.0).sqrt()
        })
        .collect()
}

fn mu_tuple(mu: &ParameterVector) -> [f64; 4] {
    [mu.mu0, mu.mu1, mu.mu2, mu.mu3]
}

/// Full-space solve whose advection field and loads come from the reduced
/// previous state; the step the greedy enrichment harvests new basis
/// functions from.
pub fn step_intermediate(
    model: &ReducedModel,
    ops: &AssembledOperators,
    sys: &AffineSystem,
    reduced_prev: &ReducedState,
    mu: ParameterVector,
) -> Result<State> {
    let (u_prev, _) = model.reconstruct(&reduced_prev.c);
    let (d_prev_raw, _) = model.reconstruct(&reduced_prev.acc);
    // the accumulator already integrates dt * c; restrict to the wall and
    // add the (exactly carried) window-start displacement
    let d_prev = Col::from_fn(ops.space.n_u, |i| {
        if ops.space.wall_mask[i] {
            d_prev_raw[i] + reduced_prev.d0_weight * model.window_d0[i]
        } else {
            0.0
        }
    });

    let (mut trips, mut rhs) = sys.evaluate_triplets(
        &mu,
        &FullPrev {
            u_tilde: &u_prev,
            d_s: &d_prev,
        },
    )?;
    eliminate_dirichlet_triplets(&mut trips, &ops.space.dirichlet_mask);
    mask_col(&mut rhs, &ops.space.dirichlet_mask);
    let a = sp_from_triplets(sys.n, sys.n, &trips);
    let sol = LuSolver::new(a)?.solve(&rhs)?;

    let n_u = ops.space.n_u;
    let u_tilde = Col::from_fn(n_u, |i| sol[i]);
    let p = Col::from_fn(ops.space.n_p, |i| sol[n_u + i]);
    let u = &u_tilde + &ops.lift * faer::Scale(mu.mu3 * mu.mu0);
    let mut d_s = d_prev.clone();
    for i in 0..n_u {
        if ops.space.wall_mask[i] {
            d_s[i] += model.params.dt * u[i];
        }
    }
    Ok(State {
        u,
        p,
        d_s,
        t: reduced_prev.t + model.params.dt,
        n: reduced_prev.n + 1,
    })
}

/// A reduced trajectory over a recorded window: states (index 0 is the
/// warm-up end), the step parameters, and per-step residual dual norms.
pub struct RomTrajectory {
    pub states: Vec<ReducedState>,
    pub mus: Vec<ParameterVector>,
    pub dual_norms: Vec<f64>,
}

impl RomTrajectory {
    /// State after recorded step `k` (1-based; 0 is the initial state).
    pub fn state(&self, k: usize) -> &ReducedState {
        &self.states[k]
    }

    pub fn n_steps(&self) -> usize {
        self.mus.len()
    }
}

/// Run the reduced model over the recorded window, seeded at the stored
/// window-start truth state (its X-projection). This is the standard online
/// protocol: the expensive warm-up happened once, offline, in the
/// high-fidelity run.
pub fn run_reduced_from(
    model: &ReducedModel,
    ops: &AssembledOperators,
    data: &BoundaryData,
    seed: &crate::hifi::SnapshotSet,
    n_steps: usize,
    alpha: f64,
) -> Result<RomTrajectory> {
    let dt = model.params.dt;
    let c0 = model.project_state(ops, &seed.initial.u_tilde, &seed.initial.p);
    // the stored window-start displacement is carried exactly by the model's
    // fixed d0 term; any difference between it and this seed's displacement
    // (zero when running over the window the model was built for) is
    // projected into the accumulator
    let d0_diff = &seed.initial.d_s - &model.window_d0;
    let zero_p = Col::zeros(model.space.n_p);
    let acc0 = if d0_diff.norm_l2() > 0.0 {
        model.project_state(ops, &d0_diff, &zero_p)
    } else {
        Col::zeros(model.n_modes())
    };
    let mut state = ReducedState {
        c: c0,
        acc: acc0,
        d0_weight: 1.0,
        t: seed.initial.t,
        n: 0,
    };
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut mus = Vec::with_capacity(n_steps);
    let mut pairs = Vec::with_capacity(n_steps);
    states.push(state.clone());
    for _ in 0..n_steps {
        let mu = make_parameter_at(state.t, data, dt, alpha)?;
        let next = step_reduced(model, &state, mu)?;
        pairs.push((state.clone(), next.clone(), mu));
        mus.push(mu);
        states.push(next.clone());
        state = next;
    }
    let dual_norms = residual_dual_norms_batch(model, &pairs);
    Ok(RomTrajectory {
        states,
        mus,
        dual_norms,
    })
}

/// Run the reduced two-period protocol mirroring the high-fidelity one:
/// start from rest at t = 0, warm up whole periods, then record `n_steps`.
pub fn run_reduced(
    model: &ReducedModel,
    data: &BoundaryData,
    n_steps: usize,
    alpha: f64,
    warmup_periods: usize,
) -> Result<RomTrajectory> {
    let dt = model.params.dt;
    let period_steps = (data.period / dt).round() as usize;
    if period_steps == 0 {
        return Err(Error::invalid("period shorter than one time step"));
    }
    // the reduced run starts from the X-projection of the homogenized
    // initial state: the physical state is zero, so the homogenized one is
    // minus the scaled lifting (exactly zero whenever sigma1 starts at zero)
    let s0 = data.sigma1_at(0.0) * crate::affine::theta(alpha, 0.0)?;
    let mut state = ReducedState::zero(model.n_modes());
    state.c = &model.lift_proj * faer::Scale(-s0);
    for _ in 0..warmup_periods * period_steps {
        let mu = make_parameter_at(state.t, data, dt, alpha)?;
        state = step_reduced(model, &state, mu)?;
    }

    let mut states = Vec::with_capacity(n_steps + 1);
    let mut mus = Vec::with_capacity(n_steps);
    let mut pairs = Vec::with_capacity(n_steps);
    states.push(state.clone());
    for _ in 0..n_steps {
        let mu = make_parameter_at(state.t, data, dt, alpha)?;
        let next = step_reduced(model, &state, mu)?;
        pairs.push((state.clone(), next.clone(), mu));
        mus.push(mu);
        states.push(next.clone());
        state = next;
    }
    let dual_norms = residual_dual_norms_batch(model, &pairs);
    Ok(RomTrajectory {
        states,
        mus,
        dual_norms,
    })
}

pub mod archive;
