//! Exact affine decomposition of one time step.
//!
//! A single step of the scheme is a linear steady problem in the unknown pair
//! (velocity, pressure), parametrized by the scalar vector `mu` (boundary
//! signal values at the two time levels plus the inlet perturbation factor)
//! and by the previous state. This module gathers the parameter-independent
//! monolithic matrices and vectors once and reproduces the stepped operator
//! and load exactly as `mu`-weighted sums; the decomposition is exact, not an
//! approximation, which is what makes the offline/online split lossless.
//!
//! The unknown is the homogenized velocity: the inlet data is imposed through
//! a fixed nodal lifting field scaled by the current signal value, so the
//! constrained dofs of the stepped system are zero.

use std::sync::Arc;

use faer::prelude::*;
use faer::sparse::SparseColMat;

use crate::error::{Error, Result};
use crate::fem::{assemble_convection, AssembledOperators, BoundaryData, FunctionSpace};
use crate::sparse::{push_block, push_block_transposed, sp_from_triplets, Trip};

/// Period of the inlet perturbation factor, s.
pub const THETA_PERIOD: f64 = 0.8;
/// Largest admissible perturbation amplitude.
pub const ALPHA_MAX: f64 = 0.2;

/// Inlet perturbation factor `theta(alpha, t) = 1 + alpha sin(2 pi t / 0.8)`.
pub fn theta(alpha: f64, t: f64) -> Result<f64> {
    if !(0.0..=ALPHA_MAX).contains(&alpha) {
        return Err(Error::invalid(format!(
            "perturbation amplitude must lie in [0, {ALPHA_MAX}], got {alpha}"
        )));
    }
    Ok(1.0 + alpha * (2.0 * std::f64::consts::PI * t / THETA_PERIOD).sin())
}

/// Perturbation parameter with its (fixed) period.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct PerturbationParam {
    pub alpha: f64,
    pub period: f64,
}

impl PerturbationParam {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(0.0..=ALPHA_MAX).contains(&alpha) {
            return Err(Error::invalid(format!(
                "perturbation amplitude must lie in [0, {ALPHA_MAX}], got {alpha}"
            )));
        }
        Ok(PerturbationParam {
            alpha,
            period: THETA_PERIOD,
        })
    }

    pub fn theta_at(&self, t: f64) -> f64 {
        1.0 + self.alpha * (2.0 * std::f64::consts::PI * t / self.period).sin()
    }
}

/// Scalar parameters of one time step:
/// `[sigma1(t_{n+1}), sigma2(t_{n+1}), sigma1(t_n), theta(alpha, t_n)]`.
///
/// `mu3 = 1` recovers the unperturbed three-parameter problem bit for bit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParameterVector {
    pub mu0: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
}

impl ParameterVector {
    pub fn new(mu0: f64, mu1: f64, mu2: f64, mu3: f64) -> Self {
        ParameterVector { mu0, mu1, mu2, mu3 }
    }
}

/// Evaluate the parameter vector for the step from index `n` to `n + 1`.
///
/// The perturbation factor is evaluated at the previous level `t_n`,
/// mirroring the time-level bookkeeping of the stepped scheme.
pub fn make_parameter(
    n: usize,
    data: &BoundaryData,
    dt: f64,
    alpha: f64,
) -> Result<ParameterVector> {
    make_parameter_at(n as f64 * dt, data, dt, alpha)
}

/// Same as [`make_parameter`] with an absolute time origin, used by cyclic
/// greedy trajectories that restart mid-period.
pub fn make_parameter_at(
    t_n: f64,
    data: &BoundaryData,
    dt: f64,
    alpha: f64,
) -> Result<ParameterVector> {
    Ok(ParameterVector {
        mu0: data.sigma1_at(t_n + dt),
        mu1: data.sigma2_at(t_n + dt),
        mu2: data.sigma1_at(t_n),
        mu3: theta(alpha, t_n)?,
    })
}

/// Coefficient of a parameter-independent operator term.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpCoeff {
    /// The constant part of the stepped operator.
    One,
    /// Advection by the lifting field: `mu2 mu3`.
    LiftAdvection,
}

impl OpCoeff {
    pub fn eval(self, mu: &ParameterVector) -> f64 {
        match self {
            OpCoeff::One => 1.0,
            OpCoeff::LiftAdvection => mu.mu2 * mu.mu3,
        }
    }
}

/// Coefficient of a parameter-independent load term.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LoadCoeff {
    /// Outlet traction: `mu1`.
    Neumann,
    /// Mass carry-over of the lifting: `mu2 mu3`.
    LiftMass,
    /// Stepped operator applied to the lifting: `-mu3 mu0`.
    LiftOperator,
    /// Lifting self-advection: `-(mu2 mu3)(mu3 mu0)`.
    LiftSelfAdvection,
}

impl LoadCoeff {
    pub fn eval(self, mu: &ParameterVector) -> f64 {
        match self {
            LoadCoeff::Neumann => mu.mu1,
            LoadCoeff::LiftMass => mu.mu2 * mu.mu3,
            LoadCoeff::LiftOperator => -(mu.mu3 * mu.mu0),
            LoadCoeff::LiftSelfAdvection => -(mu.mu2 * mu.mu3) * (mu.mu3 * mu.mu0),
        }
    }
}

pub struct OperatorTerm {
    pub coeff: OpCoeff,
    pub matrix: SparseColMat<usize, f64>,
}

pub struct LoadTerm {
    pub coeff: LoadCoeff,
    pub vector: Col<f64>,
}

/// Previous state in full-space coordinates, as the stepped problem sees it:
/// homogenized velocity and accumulated wall displacement.
pub struct FullPrev<'a> {
    /// Homogenized velocity coefficients, length n_u.
    pub u_tilde: &'a Col<f64>,
    /// Wall displacement coefficients, length n_u (supported on the wall).
    pub d_s: &'a Col<f64>,
}

/// Parameter-independent pieces of the stepped operator and load, on the
/// monolithic dof set (velocity block then pressure block).
pub struct AffineSystem {
    pub space: Arc<FunctionSpace>,
    /// Fluid density; scales the convection form.
    rho_f: f64,
    pub n: usize,
    /// Fixed operator terms (state-independent).
    pub operator_terms: Vec<OperatorTerm>,
    /// Fixed load terms (state-independent).
    pub load_terms: Vec<LoadTerm>,
    /// Mass carry-over matrix applied to the previous velocity.
    pub m_time: SparseColMat<usize, f64>,
    /// Wall stiffness embedding; applied with a minus sign to the
    /// accumulated displacement.
    pub k_gamma_full: SparseColMat<usize, f64>,
    /// Monolithic lifting vector `[lift; 0]`.
    pub lift_full: Col<f64>,
}

impl AffineSystem {
    /// Gather the affine pieces from the assembled operators.
    pub fn build(ops: &AssembledOperators) -> AffineSystem {
        let space = ops.space.clone();
        let p = ops.params;
        let (n_u, n) = (space.n_u, space.n_total());

        // Constant operator: fluid and wall mass over dt, viscous and wall
        // stiffness, and the saddle coupling blocks.
        let mut t_a0: Vec<Trip> = Vec::new();
        push_block(&mut t_a0, &ops.m_f, p.rho_f / p.dt, 0, 0);
        push_block(&mut t_a0, &ops.k_visc, 1.0, 0, 0);
        push_block(&mut t_a0, &ops.m_gamma, p.h_s * p.rho_s / p.dt, 0, 0);
        push_block(&mut t_a0, &ops.k_gamma, p.dt, 0, 0);
        push_block_transposed(&mut t_a0, &ops.b, -1.0, 0, n_u);
        push_block(&mut t_a0, &ops.b, 1.0, n_u, 0);
        let a0 = sp_from_triplets(n, n, &t_a0);

        // Mass carry-over from the previous time level.
        let mut t_mt: Vec<Trip> = Vec::new();
        push_block(&mut t_mt, &ops.m_f, p.rho_f / p.dt, 0, 0);
        push_block(&mut t_mt, &ops.m_gamma, p.h_s * p.rho_s / p.dt, 0, 0);
        let m_time = sp_from_triplets(n, n, &t_mt);

        let mut t_kg: Vec<Trip> = Vec::new();
        push_block(&mut t_kg, &ops.k_gamma, 1.0, 0, 0);
        let k_gamma_full = sp_from_triplets(n, n, &t_kg);

        // Advection by the (fixed) lifting field.
        let conv_lift_raw = assemble_convection(&space, &ops.lift)
            .expect("lifting advection assembly cannot fail on a valid space");
        let mut t_cl: Vec<Trip> = Vec::new();
        push_block(&mut t_cl, &conv_lift_raw, p.rho_f, 0, 0);
        let conv_lift = sp_from_triplets(n, n, &t_cl);

        let lift_full = Col::from_fn(n, |i| if i < n_u { ops.lift[i] } else { 0.0 });
        let f_n_full = Col::from_fn(n, |i| if i < n_u { ops.f_n[i] } else { 0.0 });

        let a0_lift = &a0 * &lift_full;
        let m_lift = &m_time * &lift_full;
        let conv_lift_lift = &conv_lift * &lift_full;

        AffineSystem {
            rho_f: p.rho_f,
            n,
            operator_terms: vec![
                OperatorTerm {
                    coeff: OpCoeff::One,
                    matrix: a0,
                },
                OperatorTerm {
                    coeff: OpCoeff::LiftAdvection,
                    matrix: conv_lift,
                },
            ],
            load_terms: vec![
                LoadTerm {
                    coeff: LoadCoeff::Neumann,
                    vector: f_n_full,
                },
                LoadTerm {
                    coeff: LoadCoeff::LiftMass,
                    vector: m_lift,
                },
                LoadTerm {
                    coeff: LoadCoeff::LiftOperator,
                    vector: a0_lift,
                },
                LoadTerm {
                    coeff: LoadCoeff::LiftSelfAdvection,
                    vector: conv_lift_lift,
                },
            ],
            m_time,
            k_gamma_full,
            lift_full,
            space,
        }
    }

    /// Advection matrix for a given velocity field, embedded monolithically
    /// and carrying the density factor.
    pub fn convection_full(&self, w_vel: &Col<f64>) -> Result<SparseColMat<usize, f64>> {
        let raw = assemble_convection(&self.space, w_vel)?;
        let mut t: Vec<Trip> = Vec::new();
        push_block(&mut t, &raw, self.rho_f, 0, 0);
        Ok(sp_from_triplets(self.n, self.n, &t))
    }

    /// Operator and load of one step as triplets plus a dense vector; the
    /// Dirichlet rows are untouched (constraints are the solver's job).
    pub fn evaluate_triplets(
        &self,
        mu: &ParameterVector,
        prev: &FullPrev,
    ) -> Result<(Vec<Trip>, Col<f64>)> {
        if prev.u_tilde.nrows() != self.space.n_u || prev.d_s.nrows() != self.space.n_u {
            return Err(Error::invalid(format!(
                "previous state has {} velocity entries, expected {}",
                prev.u_tilde.nrows(),
                self.space.n_u
            )));
        }

        let mut trips: Vec<Trip> = Vec::new();
        for term in &self.operator_terms {
            push_block(&mut trips, &term.matrix, term.coeff.eval(mu), 0, 0);
        }
        let conv_prev = self.convection_full(prev.u_tilde)?;
        push_block(&mut trips, &conv_prev, 1.0, 0, 0);

        let mut load = Col::zeros(self.n);
        for term in &self.load_terms {
            let c = term.coeff.eval(mu);
            load += &term.vector * faer::Scale(c);
        }
        // state-dependent loads: previous-velocity mass, displacement
        // stiffness, and advection of the lifting by the previous velocity
        let prev_full = Col::from_fn(self.n, |i| {
            if i < self.space.n_u {
                prev.u_tilde[i]
            } else {
                0.0
            }
        });
        let d_full = Col::from_fn(self.n, |i| {
            if i < self.space.n_u {
                prev.d_s[i]
            } else {
                0.0
            }
        });
        load += &self.m_time * &prev_full;
        load -= &self.k_gamma_full * &d_full;
        load -= (&conv_prev * &self.lift_full) * faer::Scale(mu.mu3 * mu.mu0);

        Ok((trips, load))
    }

    /// [`Self::evaluate_triplets`] compressed into a sparse matrix.
    pub fn evaluate(
        &self,
        mu: &ParameterVector,
        prev: &FullPrev,
    ) -> Result<(SparseColMat<usize, f64>, Col<f64>)> {
        let (trips, load) = self.evaluate_triplets(mu, prev)?;
        Ok((sp_from_triplets(self.n, self.n, &trips), load))
    }
}
