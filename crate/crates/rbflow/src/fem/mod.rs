//! Taylor-Hood finite element spaces and assembly of every
//! parameter-independent operator of the flow model.
//!
//! The velocity space is quadratic (vertices plus edge midpoints, two
//! components per node), the pressure space linear on the vertices; the pair
//! is inf-sup stable without stabilization terms. Assembled matrices are kept
//! free of Dirichlet constraints so the same operators serve both the
//! constrained solves and residual evaluation on the full space; constraint
//! handling happens in the solver layer.
//!
//! Physical constants that never vary in time are baked into the matrices
//! that name them (`k_visc` carries `2 mu`, `k_gamma` carries `h_s` and the
//! Lame constants); the purely geometric mass and coupling matrices stay raw
//! and receive their coefficients in the affine layer.

pub mod quadrature;
pub mod shape;

use std::collections::BTreeMap;
use std::sync::Arc;

use faer::prelude::*;
use faer::sparse::SparseColMat;

use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, Mesh};
use crate::sparse::{sp_from_triplets, Trip};
use quadrature::{gauss_legendre_01, tri_rule_collapsed, tri_rule_deg5, TriPoint};

/// Fluid, wall, and time-discretization constants (CGS units).
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct PhysicalParams {
    /// Fluid density, g/cm^3.
    pub rho_f: f64,
    /// Wall density, g/cm^3.
    pub rho_s: f64,
    /// Dynamic viscosity, poise.
    pub mu: f64,
    /// Wall thickness, cm.
    pub h_s: f64,
    /// First Lame constant of the wall, dyn/cm^2.
    pub lambda_s: f64,
    /// Second Lame constant of the wall, dyn/cm^2.
    pub mu_s: f64,
    /// Time step, s.
    pub dt: f64,
}

impl PhysicalParams {
    /// Blood-like defaults.
    pub fn blood_like(dt: f64) -> Self {
        PhysicalParams {
            rho_f: 1.06,
            rho_s: 1.1,
            mu: 0.035,
            h_s: 0.05,
            lambda_s: 1e6,
            mu_s: 1e6,
            dt,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("rho_f", self.rho_f),
            ("rho_s", self.rho_s),
            ("mu", self.mu),
            ("h_s", self.h_s),
            ("lambda_s", self.lambda_s),
            ("mu_s", self.mu_s),
            ("dt", self.dt),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!(
                    "physical parameter {name} must be strictly positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Spatial boundary profile: position -> vector value.
pub type SpatialProfile = Box<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>;
/// Scalar periodic signal of time.
pub type TimeSignal = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// Separable boundary data: `g_D(x,t) = sigma1(t) g~_D(x)` on the inlet and
/// `g_N(x,t) = sigma2(t) g~_N(x)` on the outlet, both periodic in time.
pub struct BoundaryData {
    pub g_d_profile: SpatialProfile,
    pub sigma1: TimeSignal,
    pub g_n_profile: SpatialProfile,
    pub sigma2: TimeSignal,
    /// Common period of the two signals, s.
    pub period: f64,
}

impl BoundaryData {
    pub fn sigma1_at(&self, t: f64) -> f64 {
        (self.sigma1)(t)
    }

    pub fn sigma2_at(&self, t: f64) -> f64 {
        (self.sigma2)(t)
    }
}

/// Common spatial profiles.
pub mod profiles {
    use super::SpatialProfile;

    /// Parabolic inlet profile with the given peak axial velocity on a
    /// channel of the given height: `u_x(y) = peak * 4 y (H - y) / H^2`.
    pub fn poiseuille(height: f64, peak: f64) -> SpatialProfile {
        Box::new(move |x| [peak * 4.0 * x[1] * (height - x[1]) / (height * height), 0.0])
    }

    /// Constant traction vector on the outlet; a mean-pressure condition of
    /// magnitude `p` uses `uniform([-p, 0.0])` on a right-facing outlet.
    pub fn uniform(value: [f64; 2]) -> SpatialProfile {
        Box::new(move |_| value)
    }

    pub fn zero() -> SpatialProfile {
        Box::new(|_| [0.0, 0.0])
    }
}

/// Common time signals.
pub mod signals {
    use super::TimeSignal;

    pub fn constant(amplitude: f64) -> TimeSignal {
        Box::new(move |_| amplitude)
    }

    pub fn sine(amplitude: f64, period: f64) -> TimeSignal {
        Box::new(move |t| amplitude * (2.0 * std::f64::consts::PI * t / period).sin())
    }

    /// Pulsatile positive waveform `amplitude * (1 + 0.5 sin(2 pi t / T))`.
    pub fn offset_sine(amplitude: f64, period: f64) -> TimeSignal {
        Box::new(move |t| amplitude * (1.0 + 0.5 * (2.0 * std::f64::consts::PI * t / period).sin()))
    }
}

/// Taylor-Hood dof layout over a mesh.
///
/// Velocity node `k` owns dofs `2k` (x-component) and `2k+1` (y-component);
/// nodes enumerate mesh vertices first, then edge midpoints in first-seen
/// order over the triangle list. Pressure dof `k` is vertex `k`.
pub struct FunctionSpace {
    pub mesh: Arc<Mesh>,
    /// Coordinates of all velocity nodes (vertices then midpoints).
    pub node_coords: Vec<[f64; 2]>,
    /// Six velocity nodes per triangle: [v0, v1, v2, m01, m12, m20].
    pub triangle_nodes: Vec<[usize; 6]>,
    /// Velocity nodes of each boundary edge: [end0, end1, midpoint].
    pub boundary_edge_nodes: Vec<[usize; 3]>,
    pub n_u: usize,
    pub n_p: usize,
    /// Velocity dofs on the inlet, sorted.
    pub dirichlet_dofs: Vec<usize>,
    /// Mask of length `n_u + n_p`; true on constrained velocity dofs.
    pub dirichlet_mask: Vec<bool>,
    /// Mask of length `n_u`; true on wall (Robin) velocity dofs.
    pub wall_mask: Vec<bool>,
}

impl FunctionSpace {
    pub fn new(mesh: Arc<Mesh>) -> FunctionSpace {
        let n_v = mesh.n_vertices();

        // Unique edges in first-seen order over triangles.
        let mut edge_index: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut midpoints: Vec<[f64; 2]> = Vec::new();
        let mut edge_of = |a: usize, b: usize, verts: &[[f64; 2]], mids: &mut Vec<[f64; 2]>| {
            let key = (a.min(b), a.max(b));
            let next = edge_index.len();
            *edge_index.entry(key).or_insert_with(|| {
                mids.push([
                    0.5 * (verts[a][0] + verts[b][0]),
                    0.5 * (verts[a][1] + verts[b][1]),
                ]);
                next
            })
        };

        let mut triangle_nodes = Vec::with_capacity(mesh.n_triangles());
        for tri in &mesh.triangles {
            let [a, b, c] = *tri;
            let m01 = n_v + edge_of(a, b, &mesh.vertices, &mut midpoints);
            let m12 = n_v + edge_of(b, c, &mesh.vertices, &mut midpoints);
            let m20 = n_v + edge_of(c, a, &mesh.vertices, &mut midpoints);
            triangle_nodes.push([a, b, c, m01, m12, m20]);
        }

        let mut node_coords = mesh.vertices.clone();
        node_coords.extend_from_slice(&midpoints);

        let boundary_edge_nodes: Vec<[usize; 3]> = mesh
            .boundary_edges
            .iter()
            .map(|e| {
                let (a, b) = e.vertices;
                let key = (a.min(b), a.max(b));
                let m = n_v + edge_index[&key];
                [a, b, m]
            })
            .collect();

        let n_nodes = node_coords.len();
        let n_u = 2 * n_nodes;
        let n_p = n_v;

        let mut dirichlet_node = vec![false; n_nodes];
        let mut wall_node = vec![false; n_nodes];
        for (e, nodes) in mesh.boundary_edges.iter().zip(&boundary_edge_nodes) {
            let mark = match e.tag {
                BoundaryTag::DirichletInlet => &mut dirichlet_node,
                BoundaryTag::RobinWall => &mut wall_node,
                BoundaryTag::NeumannOutlet => continue,
            };
            for &n in nodes {
                mark[n] = true;
            }
        }

        let mut dirichlet_dofs = Vec::new();
        let mut dirichlet_mask = vec![false; n_u + n_p];
        let mut wall_mask = vec![false; n_u];
        for k in 0..n_nodes {
            if dirichlet_node[k] {
                dirichlet_dofs.push(2 * k);
                dirichlet_dofs.push(2 * k + 1);
                dirichlet_mask[2 * k] = true;
                dirichlet_mask[2 * k + 1] = true;
            }
            if wall_node[k] {
                wall_mask[2 * k] = true;
                wall_mask[2 * k + 1] = true;
            }
        }

        FunctionSpace {
            mesh,
            node_coords,
            triangle_nodes,
            boundary_edge_nodes,
            n_u,
            n_p,
            dirichlet_dofs,
            dirichlet_mask,
            wall_mask,
        }
    }

    /// Total monolithic dimension (velocity then pressure dofs).
    pub fn n_total(&self) -> usize {
        self.n_u + self.n_p
    }

    /// Affine geometry of triangle `t`: (Jacobian det, inverse-transpose).
    fn geometry(&self, t: usize) -> Result<(f64, [[f64; 2]; 2], [usize; 6])> {
        let nodes = self.triangle_nodes[t];
        let p0 = self.node_coords[nodes[0]];
        let p1 = self.node_coords[nodes[1]];
        let p2 = self.node_coords[nodes[2]];
        let (a, b) = (p1[0] - p0[0], p2[0] - p0[0]);
        let (c, d) = (p1[1] - p0[1], p2[1] - p0[1]);
        let det = a * d - b * c;
        let scale = (a * a + b * b + c * c + d * d).max(1e-300);
        if det <= 1e-14 * scale {
            return Err(Error::SingularElement {
                triangle: t,
                det_j: det,
            });
        }
        // J^{-T} = 1/det [[d, -c], [-b, a]]
        let inv_jt = [[d / det, -c / det], [-b / det, a / det]];
        Ok((det, inv_jt, nodes))
    }

    /// Map reference gradients to physical ones.
    fn phys_grads(inv_jt: [[f64; 2]; 2], ref_grads: &[[f64; 2]; 6]) -> [[f64; 2]; 6] {
        let mut out = [[0.0; 2]; 6];
        for (o, g) in out.iter_mut().zip(ref_grads) {
            o[0] = inv_jt[0][0] * g[0] + inv_jt[0][1] * g[1];
            o[1] = inv_jt[1][0] * g[0] + inv_jt[1][1] * g[1];
        }
        out
    }

    /// Evaluate a P2 coefficient field at a reference point of triangle `t`.
    pub fn eval_velocity(&self, coeffs: &Col<f64>, t: usize, xi: f64, eta: f64) -> [f64; 2] {
        let vals = shape::p2_values(xi, eta);
        let nodes = self.triangle_nodes[t];
        let mut out = [0.0; 2];
        for (n, v) in nodes.iter().zip(vals) {
            out[0] += coeffs[2 * n] * v;
            out[1] += coeffs[2 * n + 1] * v;
        }
        out
    }

    /// Velocity gradient (du_i/dx_j) of a P2 field at a reference point.
    pub fn eval_velocity_gradient(
        &self,
        coeffs: &Col<f64>,
        t: usize,
        xi: f64,
        eta: f64,
    ) -> Result<[[f64; 2]; 2]> {
        let (_, inv_jt, nodes) = self.geometry(t)?;
        let grads = Self::phys_grads(inv_jt, &shape::p2_grads(xi, eta));
        let mut g = [[0.0; 2]; 2];
        for (n, d) in nodes.iter().zip(grads) {
            for (i, comp) in [coeffs[2 * n], coeffs[2 * n + 1]].into_iter().enumerate() {
                g[i][0] += comp * d[0];
                g[i][1] += comp * d[1];
            }
        }
        Ok(g)
    }

    /// Evaluate a P1 pressure field at a reference point of triangle `t`.
    pub fn eval_pressure(&self, coeffs: &Col<f64>, t: usize, xi: f64, eta: f64) -> f64 {
        let vals = shape::p1_values(xi, eta);
        let tri = self.mesh.triangles[t];
        tri.iter().zip(vals).map(|(&v, phi)| coeffs[v] * phi).sum()
    }
}

/// All parameter-independent matrices and vectors of the scheme.
pub struct AssembledOperators {
    pub space: Arc<FunctionSpace>,
    pub params: PhysicalParams,
    /// Raw vector-valued fluid mass, n_u x n_u.
    pub m_f: SparseColMat<usize, f64>,
    /// Viscous stiffness `2 mu D(u):D(v)`, n_u x n_u.
    pub k_visc: SparseColMat<usize, f64>,
    /// Pressure-divergence coupling `q div u`, n_p x n_u.
    pub b: SparseColMat<usize, f64>,
    /// Raw wall mass on the Robin boundary, n_u x n_u.
    pub m_gamma: SparseColMat<usize, f64>,
    /// Wall stiffness `h_s Pi_Gamma(u) : grad_Gamma v`, n_u x n_u.
    pub k_gamma: SparseColMat<usize, f64>,
    /// Velocity norm Gram matrix: H1 over the domain plus H1 along the wall.
    pub x_u: SparseColMat<usize, f64>,
    /// Pressure norm Gram matrix (L2 mass), n_p x n_p.
    pub x_p: SparseColMat<usize, f64>,
    /// Nodal lifting of the inlet profile; zero off the inlet.
    pub lift: Col<f64>,
    /// Neumann load of the outlet traction profile.
    pub f_n: Col<f64>,
}

/// Assemble every constant operator on the full (unconstrained) dof set.
pub fn assemble_constant_operators(
    space: Arc<FunctionSpace>,
    params: PhysicalParams,
    data: &BoundaryData,
) -> Result<AssembledOperators> {
    params.validate()?;
    let rule = tri_rule_deg5();
    let n_u = space.n_u;
    let n_p = space.n_p;

    // Shape values at quadrature points are triangle-independent.
    let p2_vals: Vec<[f64; 6]> = rule.iter().map(|q| shape::p2_values(q.xi, q.eta)).collect();
    let p2_refg: Vec<[[f64; 2]; 6]> = rule.iter().map(|q| shape::p2_grads(q.xi, q.eta)).collect();
    let p1_vals: Vec<[f64; 3]> = rule.iter().map(|q| shape::p1_values(q.xi, q.eta)).collect();

    let nt = space.triangle_nodes.len();
    let mut t_mf: Vec<Trip> = Vec::with_capacity(nt * 72);
    let mut t_kv: Vec<Trip> = Vec::with_capacity(nt * 144);
    let mut t_b: Vec<Trip> = Vec::with_capacity(nt * 36);
    let mut t_xu: Vec<Trip> = Vec::with_capacity(nt * 144);
    let mut t_xp: Vec<Trip> = Vec::with_capacity(nt * 9);

    for t in 0..nt {
        let (det, inv_jt, nodes) = space.geometry(t)?;
        let tri = space.mesh.triangles[t];
        for (q, point) in rule.iter().enumerate() {
            let w = point.w * det;
            let phi = &p2_vals[q];
            let grads = FunctionSpace::phys_grads(inv_jt, &p2_refg[q]);
            let psi = &p1_vals[q];

            for a in 0..6 {
                let ga = grads[a];
                for b in 0..6 {
                    let gb = grads[b];
                    let mass = w * phi[a] * phi[b];
                    let gdot = w * (ga[0] * gb[0] + ga[1] * gb[1]);
                    // scalar mass on both components
                    for comp in 0..2 {
                        let (ra, cb) = (2 * nodes[a] + comp, 2 * nodes[b] + comp);
                        t_mf.push((ra, cb, mass));
                        t_xu.push((ra, cb, mass + gdot));
                    }
                    // 2 mu D(u):D(v) = mu [delta_ab grad.grad + da_beta db_alpha]
                    for alpha in 0..2 {
                        for beta in 0..2 {
                            let mut v = params.mu * w * gb[alpha] * ga[beta];
                            if alpha == beta {
                                v += params.mu * gdot;
                            }
                            t_kv.push((2 * nodes[a] + alpha, 2 * nodes[b] + beta, v));
                        }
                    }
                }
                // pressure-divergence rows: q * du_beta/dx_beta
                for (k, &pk) in tri.iter().enumerate() {
                    for beta in 0..2 {
                        t_b.push((pk, 2 * nodes[a] + beta, w * psi[k] * ga[beta]));
                    }
                }
            }
            for k in 0..3 {
                for l in 0..3 {
                    t_xp.push((tri[k], tri[l], w * psi[k] * psi[l]));
                }
            }
        }
    }

    // Boundary terms on the wall: mass, wall stiffness, and the H1(Gamma)
    // part of the velocity norm. Tangential derivatives along the (straight)
    // boundary edges are derivatives of the quadratic edge trace.
    let mut t_mg: Vec<Trip> = Vec::new();
    let mut t_kg: Vec<Trip> = Vec::new();
    let edge_rule = gauss_legendre_01(3);
    for (edge, enodes) in space.mesh.boundary_edges.iter().zip(&space.boundary_edge_nodes) {
        if edge.tag != BoundaryTag::RobinWall {
            continue;
        }
        let p = space.node_coords[enodes[0]];
        let q = space.node_coords[enodes[1]];
        let len = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
        let tang = [(q[0] - p[0]) / len, (q[1] - p[1]) / len];
        for &(s, w) in &edge_rule {
            let phi = shape::p2_edge_values(s);
            let dphi = shape::p2_edge_derivs(s);
            for a in 0..3 {
                for b in 0..3 {
                    let mass = w * len * phi[a] * phi[b];
                    let dd = w * dphi[a] * dphi[b] / len;
                    for comp in 0..2 {
                        let (ra, cb) = (2 * enodes[a] + comp, 2 * enodes[b] + comp);
                        t_mg.push((ra, cb, mass));
                        t_xu.push((ra, cb, mass + dd));
                    }
                    // h_s Pi_Gamma(u):grad_Gamma v with
                    // Pi_Gamma(u) = 2 lambda_s D_Gamma(u) + mu_s (div_Gamma u) I_Gamma
                    for alpha in 0..2 {
                        for beta in 0..2 {
                            let mut v = params.h_s
                                * (params.lambda_s + params.mu_s)
                                * dd
                                * tang[alpha]
                                * tang[beta];
                            if alpha == beta {
                                v += params.h_s * params.lambda_s * dd;
                            }
                            t_kg.push((2 * enodes[a] + alpha, 2 * enodes[b] + beta, v));
                        }
                    }
                }
            }
        }
    }

    // Neumann load vector for the outlet traction profile.
    let mut f_n = Col::zeros(n_u);
    let load_rule = gauss_legendre_01(5);
    for (edge, enodes) in space.mesh.boundary_edges.iter().zip(&space.boundary_edge_nodes) {
        if edge.tag != BoundaryTag::NeumannOutlet {
            continue;
        }
        let p = space.node_coords[enodes[0]];
        let q = space.node_coords[enodes[1]];
        let len = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
        for &(s, w) in &load_rule {
            let x = [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])];
            let g = (data.g_n_profile)(x);
            let phi = shape::p2_edge_values(s);
            for a in 0..3 {
                for comp in 0..2 {
                    f_n[2 * enodes[a] + comp] += w * len * g[comp] * phi[a];
                }
            }
        }
    }

    // Nodal lifting: the inlet profile at inlet nodes, zero everywhere else.
    let mut lift = Col::zeros(n_u);
    for &d in &space.dirichlet_dofs {
        let node = d / 2;
        let g = (data.g_d_profile)(space.node_coords[node]);
        lift[d] = g[d % 2];
    }

    Ok(AssembledOperators {
        m_f: sp_from_triplets(n_u, n_u, &t_mf),
        k_visc: sp_from_triplets(n_u, n_u, &t_kv),
        b: sp_from_triplets(n_p, n_u, &t_b),
        m_gamma: sp_from_triplets(n_u, n_u, &t_mg),
        k_gamma: sp_from_triplets(n_u, n_u, &t_kg),
        x_u: sp_from_triplets(n_u, n_u, &t_xu),
        x_p: sp_from_triplets(n_p, n_p, &t_xp),
        lift,
        f_n,
        space,
        params,
    })
}

/// Convection matrix `C(w)[i,j] = integral (w . grad phi_j) phi_i`, linear in
/// the advection field `w` (no density factor; the affine layer applies it).
pub fn assemble_convection(
    space: &FunctionSpace,
    advection: &Col<f64>,
) -> Result<SparseColMat<usize, f64>> {
    if advection.nrows() != space.n_u {
        return Err(Error::invalid(format!(
            "advection field has {} entries, expected {}",
            advection.nrows(),
            space.n_u
        )));
    }
    let rule = tri_rule_deg5();
    let p2_vals: Vec<[f64; 6]> = rule.iter().map(|q| shape::p2_values(q.xi, q.eta)).collect();
    let p2_refg: Vec<[[f64; 2]; 6]> = rule.iter().map(|q| shape::p2_grads(q.xi, q.eta)).collect();

    let mut trips: Vec<Trip> = Vec::with_capacity(space.triangle_nodes.len() * 72);
    for t in 0..space.triangle_nodes.len() {
        let (det, inv_jt, nodes) = space.geometry(t)?;
        for (q, point) in rule.iter().enumerate() {
            let w = point.w * det;
            let phi = &p2_vals[q];
            let grads = FunctionSpace::phys_grads(inv_jt, &p2_refg[q]);
            // advection velocity at the quadrature point
            let mut wvel = [0.0; 2];
            for (n, v) in nodes.iter().zip(phi) {
                wvel[0] += advection[2 * n] * v;
                wvel[1] += advection[2 * n + 1] * v;
            }
            for a in 0..6 {
                for b in 0..6 {
                    let conv = w * phi[a] * (wvel[0] * grads[b][0] + wvel[1] * grads[b][1]);
                    for comp in 0..2 {
                        trips.push((2 * nodes[a] + comp, 2 * nodes[b] + comp, conv));
                    }
                }
            }
        }
    }
    Ok(sp_from_triplets(space.n_u, space.n_u, &trips))
}

/// Volume load `integral f . v` for an arbitrary smooth source, integrated
/// with a high-order collapsed rule.
pub fn assemble_volume_load(
    space: &FunctionSpace,
    f: impl Fn([f64; 2]) -> [f64; 2],
) -> Result<Col<f64>> {
    let rule: Vec<TriPoint> = tri_rule_collapsed(6);
    let p2_vals: Vec<[f64; 6]> = rule.iter().map(|q| shape::p2_values(q.xi, q.eta)).collect();
    let mut load = Col::zeros(space.n_u);
    for t in 0..space.triangle_nodes.len() {
        let (det, _, nodes) = space.geometry(t)?;
        let p0 = space.node_coords[nodes[0]];
        let p1 = space.node_coords[nodes[1]];
        let p2 = space.node_coords[nodes[2]];
        for (q, point) in rule.iter().enumerate() {
            let w = point.w * det;
            let x = [
                p0[0] + point.xi * (p1[0] - p0[0]) + point.eta * (p2[0] - p0[0]),
                p0[1] + point.xi * (p1[1] - p0[1]) + point.eta * (p2[1] - p0[1]),
            ];
            let fv = f(x);
            for (n, phi) in nodes.iter().zip(&p2_vals[q]) {
                load[2 * n] += w * fv[0] * phi;
                load[2 * n + 1] += w * fv[1] * phi;
            }
        }
    }
    Ok(load)
}

/// Velocity norm `sqrt(u^T X_u u)`.
pub fn velocity_norm(x_u: &SparseColMat<usize, f64>, u: &Col<f64>) -> f64 {
    crate::sparse::quad_form(x_u, u, u).max(0.0).sqrt()
}

/// Pressure norm `sqrt(p^T X_p p)`.
pub fn pressure_norm(x_p: &SparseColMat<usize, f64>, p: &Col<f64>) -> f64 {
    crate::sparse::quad_form(x_p, p, p).max(0.0).sqrt()
}

/// Supremizer load `B^T p`, the velocity functional `integral p div v`.
pub fn supremizer_rhs(b: &SparseColMat<usize, f64>, p: &Col<f64>) -> Col<f64> {
    let mut out = Col::zeros(b.ncols());
    crate::sparse::for_each_entry(b, |i, j, v| out[j] += v * p[i]);
    out
}
