//! Error metrics, residual aggregates, and haemodynamic output functionals,
//! with CSV emission for plotting.
//!
//! Space-time aggregates follow a fixed convention: per-instant relative
//! errors at the snapshot instants, the squared-sum space-time errors E_N,
//! and the scaled space-time residual R_N whose numerator runs over every
//! recorded step while the denominator runs over snapshot instants only,
//! compensated by the `sqrt(N_S / N_T)` prefactor.
//!
//! Wall shear stress uses one-sided gradient reconstruction from the edge's
//! owner triangle; the traction is `(2 mu D(u) - p I) n` and its tangential
//! part is averaged over the selected wall area.

use faer::prelude::*;
use faer::sparse::SparseColMat;

use crate::error::{Error, Result};
use crate::fem::{pressure_norm, velocity_norm, AssembledOperators, FunctionSpace, PhysicalParams};
use crate::hifi::{SnapshotSet, State};
use crate::mesh::BoundaryTag;
use crate::rom::{ReducedModel, RomTrajectory};

/// Which channel wall an area selector covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WallSide {
    Bottom,
    Top,
    Both,
}

/// A wall subregion for averaged wall shear stress.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct WallArea {
    pub x_min: f64,
    pub x_max: f64,
    pub side: WallSide,
}

impl WallArea {
    /// Left and right halves of both walls; the default reporting areas.
    pub fn default_pair(length: f64) -> [WallArea; 2] {
        [
            WallArea {
                x_min: 0.0,
                x_max: 0.5 * length,
                side: WallSide::Both,
            },
            WallArea {
                x_min: 0.5 * length,
                x_max: length,
                side: WallSide::Both,
            },
        ]
    }
}

/// Per-instant errors plus space-time aggregates of a ROM-vs-truth pair.
pub struct ErrorReport {
    pub times: Vec<f64>,
    /// Relative velocity error at each snapshot instant.
    pub eps_u: Vec<f64>,
    /// Relative pressure error at each snapshot instant.
    pub eps_p: Vec<f64>,
    /// Residual dual norm at each snapshot instant.
    pub dual_norms: Vec<f64>,
    /// Absolute X-norm error at each snapshot instant.
    pub err_x: Vec<f64>,
    /// Truth norms at each instant (companions for recomputation).
    pub norm_u: Vec<f64>,
    pub norm_p: Vec<f64>,
    pub e_n_u: f64,
    pub e_n_p: f64,
    pub r_n: f64,
    /// (velocity modes, pressure modes, total basis size).
    pub counts: (usize, usize, usize),
}

impl ErrorReport {
    /// Recompute the aggregates from the stored per-instant values; the
    /// results must match the stored aggregates to roundoff.
    pub fn recompute_aggregates(&self) -> (f64, f64) {
        let num_u: f64 = self
            .eps_u
            .iter()
            .zip(&self.norm_u)
            .map(|(e, n)| (e * n).powi(2))
            .sum();
        let den_u: f64 = self.norm_u.iter().map(|n| n * n).sum();
        let num_p: f64 = self
            .eps_p
            .iter()
            .zip(&self.norm_p)
            .map(|(e, n)| (e * n).powi(2))
            .sum();
        let den_p: f64 = self.norm_p.iter().map(|n| n * n).sum();
        ((num_u / den_u).sqrt(), (num_p / den_p).sqrt())
    }
}

/// Space-time errors of a reduced trajectory against stored snapshots.
///
/// Both sides are compared in homogenized variables: the lifting component
/// is identical by construction, so differences are unaffected, and the
/// denominators use the same fields the reduction approximates.
pub fn space_time_errors(
    hifi: &SnapshotSet,
    traj: &RomTrajectory,
    model: &ReducedModel,
    x_u: &SparseColMat<usize, f64>,
    x_p: &SparseColMat<usize, f64>,
) -> Result<ErrorReport> {
    let n_s = hifi.n_samples();
    let stride = hifi.stride;
    let n_t = traj.n_steps();
    if n_t != n_s * stride {
        return Err(Error::invalid(format!(
            "trajectory has {n_t} steps, snapshots want {} (stride {stride})",
            n_s * stride
        )));
    }

    let mut times = Vec::with_capacity(n_s);
    let mut eps_u = Vec::with_capacity(n_s);
    let mut eps_p = Vec::with_capacity(n_s);
    let mut dual_at = Vec::with_capacity(n_s);
    let mut err_x = Vec::with_capacity(n_s);
    let mut norm_u = Vec::with_capacity(n_s);
    let mut norm_p = Vec::with_capacity(n_s);
    let mut den_u = 0.0;
    let mut den_p = 0.0;
    let mut num_u = 0.0;
    let mut num_p = 0.0;
    let mut den_x = 0.0;

    for k in 0..n_s {
        let step = (k + 1) * stride;
        let state = traj.state(step);
        if (state.t - hifi.times[k]).abs() > 1e-9 * hifi.times[k].abs().max(1.0) {
            return Err(Error::invalid(format!(
                "instant mismatch at sample {k}: trajectory t = {}, snapshot t = {}",
                state.t, hifi.times[k]
            )));
        }
        let (u_n, p_n) = model.reconstruct(&state.c);
        let u_h = Col::from_fn(hifi.u.nrows(), |i| hifi.u[(i, k)]);
        let p_h = Col::from_fn(hifi.p.nrows(), |i| hifi.p[(i, k)]);

        let nu = velocity_norm(x_u, &u_h);
        let np = pressure_norm(x_p, &p_h);
        let du = velocity_norm(x_u, &(&u_n - &u_h));
        let dp = pressure_norm(x_p, &(&p_n - &p_h));
        if nu == 0.0 || np == 0.0 {
            return Err(Error::invalid(format!(
                "metric undefined: zero truth norm at instant {}",
                hifi.times[k]
            )));
        }
        times.push(hifi.times[k]);
        eps_u.push(du / nu);
        eps_p.push(dp / np);
        dual_at.push(traj.dual_norms[step - 1]);
        err_x.push((du * du + dp * dp).sqrt());
        norm_u.push(nu);
        norm_p.push(np);
        num_u += du * du;
        num_p += dp * dp;
        den_u += nu * nu;
        den_p += np * np;
        den_x += nu * nu + np * np;
    }

    let dual_sq_all: f64 = traj.dual_norms.iter().map(|d| d * d).sum();
    let r_n = (n_s as f64 / n_t as f64).sqrt() * (dual_sq_all / den_x).sqrt();

    Ok(ErrorReport {
        times,
        eps_u,
        eps_p,
        dual_norms: dual_at,
        err_x,
        norm_u,
        norm_p,
        e_n_u: (num_u / den_u).sqrt(),
        e_n_p: (num_p / den_p).sqrt(),
        r_n,
        counts: (
            model.n_velocity + model.n_supremizer,
            model.n_pressure,
            model.n_modes(),
        ),
    })
}

/// Outlet flow rate: the boundary flux of the physical velocity through the
/// outlet edges, by exact edge quadrature of the quadratic trace.
pub fn outlet_flow_rate(u: &Col<f64>, space: &FunctionSpace) -> f64 {
    let rule = crate::fem::quadrature::gauss_legendre_01(3);
    let mut flux = 0.0;
    for (edge, enodes) in space.mesh.boundary_edges.iter().zip(&space.boundary_edge_nodes) {
        if edge.tag != BoundaryTag::NeumannOutlet {
            continue;
        }
        let p = space.node_coords[enodes[0]];
        let q = space.node_coords[enodes[1]];
        let len = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
        let n = [(q[1] - p[1]) / len, -(q[0] - p[0]) / len];
        for &(s, w) in &rule {
            let phi = crate::fem::shape::p2_edge_values(s);
            let mut vel = [0.0; 2];
            for (a, node) in enodes.iter().enumerate() {
                vel[0] += u[2 * node] * phi[a];
                vel[1] += u[2 * node + 1] * phi[a];
            }
            flux += w * len * (vel[0] * n[0] + vel[1] * n[1]);
        }
    }
    flux
}

/// Averaged wall shear stress over a wall area: `1/|A| integral |tau|` with
/// `tau = sigma n - (sigma n . n) n`, the stress evaluated one-sided from
/// each edge's owner triangle.
pub fn wall_shear_stress(
    state: &State,
    params: &PhysicalParams,
    space: &FunctionSpace,
    area: &WallArea,
) -> Result<f64> {
    let height = space.mesh.height;
    let rule = crate::fem::quadrature::gauss_legendre_01(3);
    let mut total = 0.0;
    let mut measure = 0.0;
    for (edge, enodes) in space.mesh.boundary_edges.iter().zip(&space.boundary_edge_nodes) {
        if edge.tag != BoundaryTag::RobinWall {
            continue;
        }
        let p = space.node_coords[enodes[0]];
        let q = space.node_coords[enodes[1]];
        let xm = 0.5 * (p[0] + q[0]);
        let ym = 0.5 * (p[1] + q[1]);
        let on_side = match area.side {
            WallSide::Bottom => ym < 0.5 * height,
            WallSide::Top => ym >= 0.5 * height,
            WallSide::Both => true,
        };
        if !on_side || xm < area.x_min || xm > area.x_max {
            continue;
        }
        let len = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
        let n = [(q[1] - p[1]) / len, -(q[0] - p[0]) / len];

        // reference coordinates of the edge endpoints in the owner triangle
        let tri = space.mesh.triangles[edge.triangle];
        let local = |v: usize| -> [f64; 2] {
            match tri.iter().position(|&t| t == v).expect("edge vertex in owner") {
                0 => [0.0, 0.0],
                1 => [1.0, 0.0],
                _ => [0.0, 1.0],
            }
        };
        let (ra, rb) = (local(edge.vertices.0), local(edge.vertices.1));

        for &(s, w) in &rule {
            let xi = ra[0] + s * (rb[0] - ra[0]);
            let eta = ra[1] + s * (rb[1] - ra[1]);
            let g = space.eval_velocity_gradient(&state.u, edge.triangle, xi, eta)?;
            let pr = space.eval_pressure(&state.p, edge.triangle, xi, eta);
            // sigma = 2 mu D(u) - p I
            let sxx = 2.0 * params.mu * g[0][0] - pr;
            let syy = 2.0 * params.mu * g[1][1] - pr;
            let sxy = params.mu * (g[0][1] + g[1][0]);
            let tvec = [sxx * n[0] + sxy * n[1], sxy * n[0] + syy * n[1]];
            let tn = tvec[0] * n[0] + tvec[1] * n[1];
            let tau = [tvec[0] - tn * n[0], tvec[1] - tn * n[1]];
            total += w * len * (tau[0] * tau[0] + tau[1] * tau[1]).sqrt();
        }
        measure += len;
    }
    if measure == 0.0 {
        return Err(Error::invalid(format!(
            "wall area [{}, {}] selects no edges",
            area.x_min, area.x_max
        )));
    }
    Ok(total / measure)
}

/// One row of the outputs table.
#[derive(Clone, Copy, Debug)]
pub struct OutputRow {
    pub t: f64,
    pub flow_rate: f64,
    pub wss: [f64; 2],
}

/// Output functionals of stored snapshots; the physical velocity is
/// recovered from the homogenized columns and the recorded lifting scales.
pub fn outputs_from_snapshots(
    snap: &SnapshotSet,
    ops: &AssembledOperators,
    areas: &[WallArea; 2],
) -> Result<Vec<OutputRow>> {
    let mut rows = Vec::with_capacity(snap.n_samples());
    for k in 0..snap.n_samples() {
        let u_tilde = Col::from_fn(snap.u.nrows(), |i| snap.u[(i, k)]);
        let u = &u_tilde + &ops.lift * faer::Scale(snap.dirichlet_scale[k]);
        let p = Col::from_fn(snap.p.nrows(), |i| snap.p[(i, k)]);
        let state = State {
            u,
            p,
            d_s: Col::zeros(snap.u.nrows()),
            t: snap.times[k],
            n: (k + 1) * snap.stride,
        };
        rows.push(OutputRow {
            t: state.t,
            flow_rate: outlet_flow_rate(&state.u, &ops.space),
            wss: [
                wall_shear_stress(&state, &ops.params, &ops.space, &areas[0])?,
                wall_shear_stress(&state, &ops.params, &ops.space, &areas[1])?,
            ],
        });
    }
    Ok(rows)
}

/// Output functionals of a reduced trajectory at the snapshot instants.
pub fn outputs_from_rom(
    traj: &RomTrajectory,
    model: &ReducedModel,
    ops: &AssembledOperators,
    stride: usize,
    areas: &[WallArea; 2],
) -> Result<Vec<OutputRow>> {
    if stride == 0 || traj.n_steps() % stride != 0 {
        return Err(Error::invalid("stride must divide the trajectory length"));
    }
    let n_s = traj.n_steps() / stride;
    let mut rows = Vec::with_capacity(n_s);
    for k in 0..n_s {
        let step = (k + 1) * stride;
        let state = traj.state(step);
        let mu = traj.mus[step - 1];
        let (u_tilde, p) = model.reconstruct(&state.c);
        let u = &u_tilde + &ops.lift * faer::Scale(mu.mu3 * mu.mu0);
        let full = State {
            u,
            p,
            d_s: Col::zeros(ops.space.n_u),
            t: state.t,
            n: step,
        };
        rows.push(OutputRow {
            t: full.t,
            flow_rate: outlet_flow_rate(&full.u, &ops.space),
            wss: [
                wall_shear_stress(&full, &ops.params, &ops.space, &areas[0])?,
                wall_shear_stress(&full, &ops.params, &ops.space, &areas[1])?,
            ],
        });
    }
    Ok(rows)
}

/// Spearman rank correlation with average ranks on ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let rx = ranks(xs);
    let ry = ranks(ys);
    pearson(&rx, &ry)
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut r = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            r[idx[k]] = avg;
        }
        i = j + 1;
    }
    r
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// `errors.csv`: per-instant error rows, 17 significant digits.
pub fn errors_csv(report: &ErrorReport) -> String {
    let mut s = String::from("t,eps_u,eps_p,dual_norm,err_X\n");
    for k in 0..report.times.len() {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt(report.times[k]),
            fmt(report.eps_u[k]),
            fmt(report.eps_p[k]),
            fmt(report.dual_norms[k]),
            fmt(report.err_x[k]),
        ));
    }
    s
}

/// `norms.csv`: truth norms per instant, the companion that makes every
/// aggregate recomputable from the emitted files.
pub fn norms_csv(report: &ErrorReport) -> String {
    let mut s = String::from("t,norm_u,norm_p\n");
    for k in 0..report.times.len() {
        s.push_str(&format!(
            "{},{},{}\n",
            fmt(report.times[k]),
            fmt(report.norm_u[k]),
            fmt(report.norm_p[k]),
        ));
    }
    s
}

/// `outputs.csv`: output functionals per instant.
pub fn outputs_csv(rows: &[OutputRow]) -> String {
    let mut s = String::from("t,flow_rate,wss_area1,wss_area2\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{}\n",
            fmt(r.t),
            fmt(r.flow_rate),
            fmt(r.wss[0]),
            fmt(r.wss[1]),
        ));
    }
    s
}

/// Parse a CSV produced by this module into named columns.
pub fn parse_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Data("empty CSV".into()))?
        .split(',')
        .map(|s| s.to_string())
        .collect::<Vec<_>>();
    let mut cols = vec![Vec::new(); header.len()];
    for (ln, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != header.len() {
            return Err(Error::Data(format!("CSV row {} has wrong arity", ln + 2)));
        }
        for (c, f) in fields.iter().enumerate() {
            cols[c].push(
                f.parse::<f64>()
                    .map_err(|e| Error::Data(format!("CSV row {}: {e}", ln + 2)))?,
            );
        }
    }
    Ok((header, cols))
}
