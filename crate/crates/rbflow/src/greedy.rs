//! Greedy enrichment of a POD-seeded reduced space.
//!
//! Each iteration runs the reduced model over the index set, ranks the
//! residual dual norms, and solves one full-space problem at the worst index
//! with the reduced trajectory supplying the advection field and loads. The
//! velocity and pressure of that solution plus one supremizer are
//! orthonormalized into the basis: the space grows by exactly three per
//! accepted iteration. New basis functions always come from the intermediate
//! solve, never from stored truth snapshots (which the enrichment only ever
//! reads to seed cyclic restarts).
//!
//! Two index sets are supported: the recorded window of a single run, and
//! the cyclic product set that restarts one reduced trajectory from every
//! snapshot and spans a full period from each.

use faer::prelude::*;

use crate::affine::{make_parameter_at, ParameterVector};
use crate::error::{Error, Result};
use crate::fem::{AssembledOperators, BoundaryData};
use crate::hifi::SnapshotSet;
use crate::pod::orthonormalize_against;
use crate::rom::{
    append_basis_column, residual_dual_norms_batch, run_reduced_from, step_intermediate,
    step_reduced, BasisKind, ReducedModel, ReducedState, RieszWorkspace, RomTrajectory,
};

/// How the greedy search enumerates candidate time indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexMode {
    /// Steps of the recorded window of one reduced run.
    SingleRun,
    /// Restart a reduced trajectory from every stored snapshot and span one
    /// period from each: indices are (step, start-snapshot) pairs.
    CyclicVector,
}

/// Enrichment parameters.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct EnrichmentConfig {
    /// Number of (velocity, pressure, supremizer) triplets to add.
    pub n_max_triplets: usize,
    /// Perturbation amplitude the enrichment trains at.
    pub alpha_train: f64,
    pub index_mode: IndexMode,
    /// Early exit when the largest dual norm falls below this floor.
    pub residual_floor: f64,
}

impl EnrichmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=crate::affine::ALPHA_MAX).contains(&self.alpha_train) {
            return Err(Error::invalid(format!(
                "alpha_train must lie in [0, {}]",
                crate::affine::ALPHA_MAX
            )));
        }
        if self.residual_floor < 0.0 {
            return Err(Error::invalid("residual_floor must be non-negative"));
        }
        Ok(())
    }
}

/// Full-order context the enrichment needs for its one-per-iteration solve.
pub struct HifiContext<'a> {
    pub ops: &'a AssembledOperators,
    pub sys: &'a crate::affine::AffineSystem,
    pub data: &'a BoundaryData,
    pub snapshots: &'a SnapshotSet,
}

/// One greedy iteration record.
#[derive(Clone, Debug)]
pub struct GreedyIteration {
    pub iteration: usize,
    /// Selected time step within its trajectory (1-based).
    pub selected_step: usize,
    /// Start-snapshot index of the selected trajectory (0 in single-run mode).
    pub selected_snapshot: usize,
    pub max_dual_norm: f64,
    pub basis_size_after: usize,
    /// True when higher-ranked candidates were rejected as numerically
    /// dependent before this selection.
    pub skipped: bool,
    pub n_skipped: usize,
}

/// Per-iteration records of one enrichment run.
#[derive(Clone, Debug, Default)]
pub struct GreedyTrace {
    pub iterations: Vec<GreedyIteration>,
    pub stopped_early: bool,
}

impl GreedyTrace {
    /// CSV export: `iteration, selected n_T, selected n_S, max_dual_norm,
    /// basis_size, skipped_flag`.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write;
        let mut s = String::from(
            "iteration,selected_n_t,selected_n_s,max_dual_norm,basis_size,skipped_flag\n",
        );
        for it in &self.iterations {
            writeln!(
                s,
                "{},{},{},{:.16e},{},{}",
                it.iteration,
                it.selected_step,
                it.selected_snapshot,
                it.max_dual_norm,
                it.basis_size_after,
                if it.skipped { 1 } else { 0 }
            )
            .unwrap();
        }
        s
    }
}

/// The cyclic candidate set: every (step offset, start snapshot) pair, one
/// period of offsets per stored snapshot.
pub fn cyclic_indices(n_snapshots: usize, n_period: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(n_snapshots * n_period);
    for s in 0..n_snapshots {
        for k in 1..=n_period {
            out.push((k, s));
        }
    }
    out
}

/// One ranked candidate index.
struct Candidate {
    step: usize,
    snapshot: usize,
    dual: f64,
}

/// Greedy enrichment: returns the grown model and the per-iteration trace.
pub fn enrich(
    model: ReducedModel,
    config: &EnrichmentConfig,
    ctx: &HifiContext,
) -> Result<(ReducedModel, GreedyTrace)> {
    config.validate()?;
    let mut model = model;
    let mut trace = GreedyTrace::default();
    if config.n_max_triplets == 0 {
        return Ok((model, trace));
    }

    let n_steps = ctx.snapshots.stride * ctx.snapshots.n_samples();
    let mut ws = RieszWorkspace::build(&model, ctx.ops, ctx.sys)?;

    for iteration in 0..config.n_max_triplets {
        // one trajectory per iteration; candidate attempts reuse it
        let traj = run_reduced_from(
            &model,
            ctx.ops,
            ctx.data,
            ctx.snapshots,
            n_steps,
            config.alpha_train,
        )?;
        let candidates = match config.index_mode {
            IndexMode::SingleRun => {
                let mut c: Vec<Candidate> = traj
                    .dual_norms
                    .iter()
                    .enumerate()
                    .map(|(k, &d)| Candidate {
                        step: k + 1,
                        snapshot: 0,
                        dual: d,
                    })
                    .collect();
                sort_candidates(&mut c);
                c
            }
            IndexMode::CyclicVector => {
                cyclic_candidates(&model, ctx, config.alpha_train, n_steps, &traj)?
            }
        };

        let max_dual = candidates.first().map(|c| c.dual).unwrap_or(0.0);
        if max_dual <= config.residual_floor {
            trace.stopped_early = true;
            break;
        }

        // walk candidates until one yields three independent functions
        let mut accepted = false;
        let mut n_skipped = 0usize;
        for cand in &candidates {
            if try_enrich_at(&mut model, &mut ws, ctx, config, cand, &traj)? {
                trace.iterations.push(GreedyIteration {
                    iteration,
                    selected_step: cand.step,
                    selected_snapshot: cand.snapshot,
                    max_dual_norm: max_dual,
                    basis_size_after: model.n_modes(),
                    skipped: n_skipped > 0,
                    n_skipped,
                });
                accepted = true;
                break;
            }
            n_skipped += 1;
        }
        if !accepted {
            trace.stopped_early = true;
            break;
        }
    }
    Ok((model, trace))
}

fn sort_candidates(c: &mut [Candidate]) {
    // descending dual norm; ties resolved toward the smallest index pair
    c.sort_by(|a, b| {
        b.dual
            .partial_cmp(&a.dual)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.snapshot.cmp(&b.snapshot))
            .then(a.step.cmp(&b.step))
    });
}

/// Reduced state of the trajectory restarted from snapshot `s`, advanced by
/// `offset` steps (0 returns the seed itself).
fn cyclic_state_at(
    model: &ReducedModel,
    ctx: &HifiContext,
    alpha: f64,
    baseline: &RomTrajectory,
    snapshot: usize,
    offset: usize,
) -> Result<ReducedState> {
    let stride = ctx.snapshots.stride;
    let abs_step = (snapshot + 1) * stride;
    let u_col = Col::from_fn(ctx.snapshots.u.nrows(), |i| ctx.snapshots.u[(i, snapshot)]);
    let p_col = Col::from_fn(ctx.snapshots.p.nrows(), |i| ctx.snapshots.p[(i, snapshot)]);
    let c = model.project_state(ctx.ops, &u_col, &p_col);
    let mut state = ReducedState {
        c,
        // in-window displacement accumulation comes from the baseline
        // reduced run at the same instant; the window-start part is the
        // model's exact fixed term
        acc: baseline.state(abs_step).acc.clone(),
        d0_weight: 1.0,
        t: ctx.snapshots.times[snapshot],
        n: 0,
    };
    for _ in 0..offset {
        let mu = make_parameter_at(state.t, ctx.data, model.params.dt, alpha)?;
        state = step_reduced(model, &state, mu)?;
    }
    Ok(state)
}

/// Dual norms over the full cyclic index set, evaluated lazily one restarted
/// trajectory at a time.
fn cyclic_candidates(
    model: &ReducedModel,
    ctx: &HifiContext,
    alpha: f64,
    n_period: usize,
    baseline: &RomTrajectory,
) -> Result<Vec<Candidate>> {
    let mut out = Vec::with_capacity(ctx.snapshots.n_samples() * n_period);
    for s in 0..ctx.snapshots.n_samples() {
        let mut state = cyclic_state_at(model, ctx, alpha, baseline, s, 0)?;
        let mut pairs: Vec<(ReducedState, ReducedState, ParameterVector)> =
            Vec::with_capacity(n_period);
        for _ in 0..n_period {
            let mu = make_parameter_at(state.t, ctx.data, model.params.dt, alpha)?;
            let next = step_reduced(model, &state, mu)?;
            pairs.push((state.clone(), next.clone(), mu));
            state = next;
        }
        let duals = residual_dual_norms_batch(model, &pairs);
        for (k, d) in duals.into_iter().enumerate() {
            out.push(Candidate {
                step: k + 1,
                snapshot: s,
                dual: d,
            });
        }
    }
    sort_candidates(&mut out);
    Ok(out)
}

/// Attempt enrichment at one candidate. Returns Ok(false) when any of the
/// three new functions is numerically in the current span, in which case the
/// caller tries the next-best index.
fn try_enrich_at(
    model: &mut ReducedModel,
    ws: &mut RieszWorkspace,
    ctx: &HifiContext,
    config: &EnrichmentConfig,
    cand: &Candidate,
    traj: &RomTrajectory,
) -> Result<bool> {
    let alpha = config.alpha_train;
    // previous reduced state of the selected step
    let prev = match config.index_mode {
        IndexMode::SingleRun => traj.state(cand.step - 1).clone(),
        IndexMode::CyclicVector => {
            cyclic_state_at(model, ctx, alpha, traj, cand.snapshot, cand.step - 1)?
        }
    };
    let mu = make_parameter_at(prev.t, ctx.data, model.params.dt, alpha)?;
    let full = step_intermediate(model, ctx.ops, ctx.sys, &prev, mu)?;
    let u_star = full.homogenized(ctx.ops, mu.mu3 * mu.mu0);
    let p_star = full.p.clone();

    // raw supremizer of the selected pressure component
    let raw_sup = crate::pod::compute_supremizers(
        ctx.ops,
        &Mat::from_fn(ctx.ops.space.n_p, 1, |i, _| p_star[i]),
    )?;

    // two-stage Gram-Schmidt: velocity and pressure first, then the
    // supremizer against the velocity block grown by the new mode
    let vel_block: Vec<Col<f64>> = (0..model.n_modes())
        .filter(|&j| model.kinds[j] != BasisKind::Pressure)
        .map(|j| model.velocity_part(j))
        .collect();
    let prs_block: Vec<Col<f64>> = (0..model.n_modes())
        .filter(|&j| model.kinds[j] == BasisKind::Pressure)
        .map(|j| {
            Col::from_fn(ctx.ops.space.n_p, |i| {
                model.basis[(ctx.ops.space.n_u + i, j)]
            })
        })
        .collect();

    let Some(phi_u) = orthonormalize_against(&ctx.ops.x_u, &vel_block, &u_star) else {
        return Ok(false);
    };
    let Some(phi_p) = orthonormalize_against(&ctx.ops.x_p, &prs_block, &p_star) else {
        return Ok(false);
    };
    let mut grown = vel_block;
    grown.push(phi_u.clone());
    let sigma = raw_sup.col(0).to_owned();
    let Some(phi_s) = orthonormalize_against(&ctx.ops.x_u, &grown, &sigma) else {
        return Ok(false);
    };

    let n = ctx.sys.n;
    let n_u = ctx.ops.space.n_u;
    let vel_col = |v: &Col<f64>| Col::from_fn(n, |i| if i < n_u { v[i] } else { 0.0 });
    let prs_col = |v: &Col<f64>| Col::from_fn(n, |i| if i >= n_u { v[i - n_u] } else { 0.0 });
    append_basis_column(model, ctx.ops, ctx.sys, ws, &vel_col(&phi_u), BasisKind::Velocity)?;
    append_basis_column(model, ctx.ops, ctx.sys, ws, &prs_col(&phi_p), BasisKind::Pressure)?;
    append_basis_column(model, ctx.ops, ctx.sys, ws, &vel_col(&phi_s), BasisKind::Supremizer)?;
    Ok(true)
}

#[cfg(test)]
mod tests;
