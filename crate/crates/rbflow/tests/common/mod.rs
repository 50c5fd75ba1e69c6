//! Shared fixtures for the integration suites: the desk benchmark pipeline,
//! seeded random draws, and small dense helpers.

#![allow(dead_code)]

use std::sync::{Arc, OnceLock};

use faer::prelude::*;
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

use rbflow::affine::AffineSystem;
use rbflow::config::RunConfig;
use rbflow::fem::{assemble_constant_operators, AssembledOperators, BoundaryData, FunctionSpace};
use rbflow::hifi::SnapshotSet;
use rbflow::mesh::Mesh;

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn random_col(r: &mut StdRng, n: usize) -> Col<f64> {
    Col::from_fn(n, |_| r.random::<f64>() - 0.5)
}

/// The desk benchmark: 20 x 6 channel cells, one 0.8 s period of 400 steps
/// recorded every 5, blood-like constants, pulsatile inlet starting at zero.
pub struct DeskBench {
    pub cfg: RunConfig,
    pub ops: Arc<AssembledOperators>,
    pub sys: AffineSystem,
    pub snapshots: SnapshotSet,
}

impl DeskBench {
    pub fn data(&self) -> BoundaryData {
        self.cfg.boundary_data()
    }
}

static DESK: OnceLock<DeskBench> = OnceLock::new();

/// Build (once) the desk benchmark and its alpha = 0 snapshot run.
pub fn desk() -> &'static DeskBench {
    DESK.get_or_init(|| {
        faer::set_global_parallelism(faer::Par::Seq);
        let cfg = RunConfig::desk_default(std::path::PathBuf::from("unused"));
        let mesh = Arc::new(
            Mesh::build_channel(cfg.mesh.length, cfg.mesh.height, cfg.mesh.nx, cfg.mesh.ny)
                .unwrap(),
        );
        let space = Arc::new(FunctionSpace::new(mesh));
        let data = cfg.boundary_data();
        let ops =
            Arc::new(assemble_constant_operators(space, cfg.physical_params(), &data).unwrap());
        let sys = AffineSystem::build(&ops);
        let snapshots = rbflow::hifi::run(
            &ops,
            &sys,
            &data,
            cfg.time.n_steps,
            cfg.time.stride,
            0.0,
        )
        .unwrap();
        DeskBench {
            cfg,
            ops,
            sys,
            snapshots,
        }
    })
}

/// Print the per-criterion verdict line and enforce it.
pub fn gate(criterion: usize, name: &str, ok: bool, detail: String) {
    println!(
        "ACCEPTANCE {criterion:02} {name}: {} ({detail})",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {criterion} ({name}) failed: {detail}");
}

/// Dense Frobenius norm of the entrywise difference of two sparse matrices,
/// relative to the second.
pub fn rel_frobenius_diff(
    a: &faer::sparse::SparseColMat<usize, f64>,
    b: &faer::sparse::SparseColMat<usize, f64>,
) -> f64 {
    let mut entries: std::collections::HashMap<(usize, usize), [f64; 2]> =
        std::collections::HashMap::new();
    rbflow::sparse::for_each_entry(a, |i, j, v| {
        entries.entry((i, j)).or_insert([0.0; 2])[0] += v;
    });
    rbflow::sparse::for_each_entry(b, |i, j, v| {
        entries.entry((i, j)).or_insert([0.0; 2])[1] += v;
    });
    let mut diff2 = 0.0;
    let mut ref2 = 0.0;
    for (_, [av, bv]) in entries {
        diff2 += (av - bv) * (av - bv);
        ref2 += bv * bv;
    }
    (diff2 / ref2.max(1e-300)).sqrt()
}

/// Least-squares slope of ln(y) against ln(x).
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}
