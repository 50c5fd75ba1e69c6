//! Command-line workbench: config-driven pipeline commands over a locked
//! workspace directory with deterministic artifacts.
//!
//! Layout under the workspace root:
//! `mesh/` exported triangulation, `snapshots/` SNAP payloads plus sidecar,
//! `rom/` model archives, `results/` CSV tables and summaries.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
//! failure.

use std::path::PathBuf;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use crate::affine::AffineSystem;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::fem::{assemble_constant_operators, AssembledOperators, FunctionSpace};
use crate::greedy::HifiContext;
use crate::mesh::Mesh;
use crate::metrics::{self, WallArea};
use crate::rom::archive::{load_model, save_model};
use crate::snap::{atomic_write, WorkspaceLock};

#[derive(Parser)]
#[command(
    name = "rbflow",
    about = "Finite-element channel flow with an elastic-wall Robin boundary and a POD/greedy reduced-order layer",
    version
)]
pub struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true, default_value = "rbflow.json")]
    pub config: PathBuf,
    /// Workspace directory (overrides the config's paths.workspace).
    #[arg(long, global = true)]
    pub workspace: Option<PathBuf>,
    /// Worker threads for the linear algebra backend; 1 keeps runs
    /// bit-reproducible.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    /// Seed for randomized test utilities; the pipeline itself never draws
    /// random numbers.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Run the high-fidelity solver and store snapshots plus outputs.
    RunHifi,
    /// Build the reduced model from stored snapshots.
    BuildRom,
    /// Run the reduced model and write error and output tables.
    RunRom {
        /// Inlet perturbation amplitude for the online run.
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
    },
    /// Greedy-enrich the stored reduced model.
    Enrich,
    /// Recompute aggregates from the emitted CSVs and check the summary.
    Compare,
    /// Recompute output functionals from stored artifacts.
    Outputs,
}

/// Entry point for the binary: parses, dispatches, maps errors to exit codes.
pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    let par = if cli.threads <= 1 {
        faer::Par::Seq
    } else {
        faer::Par::rayon(cli.threads)
    };
    faer::set_global_parallelism(par);
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

struct Pipeline {
    cfg: RunConfig,
    ws: PathBuf,
    ops: Arc<AssembledOperators>,
    sys: AffineSystem,
}

impl Pipeline {
    fn build(cli: &Cli) -> Result<Pipeline> {
        let cfg = RunConfig::load(&cli.config)?;
        let ws = cli
            .workspace
            .clone()
            .unwrap_or_else(|| cfg.paths.workspace.clone());
        let mesh = Arc::new(Mesh::build_channel(
            cfg.mesh.length,
            cfg.mesh.height,
            cfg.mesh.nx,
            cfg.mesh.ny,
        )?);
        let space = Arc::new(FunctionSpace::new(mesh));
        let data = cfg.boundary_data();
        let ops = Arc::new(assemble_constant_operators(
            space,
            cfg.physical_params(),
            &data,
        )?);
        let sys = AffineSystem::build(&ops);
        Ok(Pipeline { cfg, ws, ops, sys })
    }

    fn dir(&self, sub: &str) -> Result<PathBuf> {
        let d = self.ws.join(sub);
        std::fs::create_dir_all(&d)?;
        Ok(d)
    }

    fn wall_areas(&self) -> [WallArea; 2] {
        WallArea::default_pair(self.cfg.mesh.length)
    }

    fn load_snapshots(&self) -> Result<crate::hifi::SnapshotSet> {
        let dir = self.ws.join("snapshots");
        let (snap, side) = crate::snap::read_snapshots(&dir)?;
        let mesh_hash = format!("{:016x}", self.ops.space.mesh.content_hash());
        if side.mesh_hash != mesh_hash {
            return Err(Error::Data(format!(
                "snapshots in {} were computed on a different mesh",
                dir.display()
            )));
        }
        if snap.u.nrows() != self.ops.space.n_u || snap.p.nrows() != self.ops.space.n_p {
            return Err(Error::Data("snapshot dimensions do not match the mesh".into()));
        }
        Ok(snap)
    }

    fn model_path(&self) -> PathBuf {
        self.ws.join("rom").join("model.roma")
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let p = Pipeline::build(cli)?;
    let _lock = WorkspaceLock::acquire(&p.ws)?;
    match &cli.command {
        Command::RunHifi => cmd_run_hifi(&p),
        Command::BuildRom => cmd_build_rom(&p),
        Command::RunRom { alpha } => cmd_run_rom(&p, *alpha),
        Command::Enrich => cmd_enrich(&p),
        Command::Compare => cmd_compare(&p),
        Command::Outputs => cmd_outputs(&p),
    }
}

fn cmd_run_hifi(p: &Pipeline) -> Result<()> {
    let mesh_dir = p.dir("mesh")?;
    atomic_write(
        &mesh_dir.join("channel.txt"),
        p.ops.space.mesh.export_text().as_bytes(),
    )?;

    let data = p.cfg.boundary_data();
    let snap = crate::hifi::run_with_warmup(
        &p.ops,
        &p.sys,
        &data,
        p.cfg.time.n_steps,
        p.cfg.time.stride,
        p.cfg.signals.alpha,
        p.cfg.time.warmup_periods,
    )?;
    let snap_dir = p.dir("snapshots")?;
    crate::snap::write_snapshots(
        &snap_dir,
        &snap,
        &p.ops.params,
        p.ops.space.mesh.content_hash(),
    )?;

    let rows = metrics::outputs_from_snapshots(&snap, &p.ops, &p.wall_areas())?;
    let results = p.dir("results")?;
    atomic_write(
        &results.join("outputs_fem.csv"),
        metrics::outputs_csv(&rows).as_bytes(),
    )?;
    println!(
        "stored {} snapshots ({} steps, stride {}) and outputs_fem.csv",
        snap.n_samples(),
        p.cfg.time.n_steps,
        p.cfg.time.stride
    );
    Ok(())
}

fn cmd_build_rom(p: &Pipeline) -> Result<()> {
    let snap = p.load_snapshots()?;
    let basis = crate::pod::build_basis(&snap, &p.ops, p.cfg.pod.tol)?;
    // make the window-start seed exactly representable
    let basis = crate::pod::extend_with_state(basis, &p.ops, &snap.initial.u_tilde, &snap.initial.p)?;
    let model = crate::rom::project_with_window(&p.sys, &p.ops, &basis, &snap.initial.d_s)?;
    let rom_dir = p.dir("rom")?;
    save_model(&model, &rom_dir.join("model.roma"))?;
    println!(
        "reduced model: {} velocity + {} pressure + {} supremizer = {} basis functions (tol {:.1e})",
        model.n_velocity,
        model.n_pressure,
        model.n_supremizer,
        model.n_modes(),
        p.cfg.pod.tol
    );
    Ok(())
}

fn cmd_run_rom(p: &Pipeline, alpha: f64) -> Result<()> {
    if !(0.0..=crate::affine::ALPHA_MAX).contains(&alpha) {
        return Err(Error::Config(format!(
            "alpha must lie in [0, {}]",
            crate::affine::ALPHA_MAX
        )));
    }
    let snap = p.load_snapshots()?;
    let model = load_model(&p.model_path(), &p.ops)?;
    let data = p.cfg.boundary_data();
    let n_steps = snap.stride * snap.n_samples();
    let traj = crate::rom::run_reduced_from(&model, &p.ops, &data, &snap, n_steps, alpha)?;

    let report = metrics::space_time_errors(&snap, &traj, &model, &p.ops.x_u, &p.ops.x_p)?;
    let results = p.dir("results")?;
    atomic_write(
        &results.join("errors.csv"),
        metrics::errors_csv(&report).as_bytes(),
    )?;
    atomic_write(
        &results.join("norms.csv"),
        metrics::norms_csv(&report).as_bytes(),
    )?;
    let summary = serde_json::json!({
        "alpha": alpha,
        "e_n_u": report.e_n_u,
        "e_n_p": report.e_n_p,
        "r_n": report.r_n,
        "n_velocity_modes": report.counts.0,
        "n_pressure_modes": report.counts.1,
        "n_basis": report.counts.2,
    });
    atomic_write(
        &results.join("summary.json"),
        serde_json::to_vec_pretty(&summary).unwrap().as_slice(),
    )?;

    let rows = metrics::outputs_from_rom(&traj, &model, &p.ops, snap.stride, &p.wall_areas())?;
    atomic_write(
        &results.join("outputs_rom.csv"),
        metrics::outputs_csv(&rows).as_bytes(),
    )?;
    println!(
        "online run at alpha = {alpha}: E_N(u) = {:.4e}, E_N(p) = {:.4e}, R_N = {:.4e}",
        report.e_n_u, report.e_n_p, report.r_n
    );
    Ok(())
}

fn cmd_enrich(p: &Pipeline) -> Result<()> {
    let snap = p.load_snapshots()?;
    let model = load_model(&p.model_path(), &p.ops)?;
    let config = p.cfg.greedy_config()?;
    let data = p.cfg.boundary_data();
    let ctx = HifiContext {
        ops: &p.ops,
        sys: &p.sys,
        data: &data,
        snapshots: &snap,
    };
    let n_before = model.n_modes();
    let (model, trace) = crate::greedy::enrich(model, &config, &ctx)?;
    let rom_dir = p.dir("rom")?;
    save_model(&model, &rom_dir.join("model_enriched.roma"))?;
    let results = p.dir("results")?;
    atomic_write(
        &results.join("greedy_trace.csv"),
        trace.to_csv().as_bytes(),
    )?;
    println!(
        "enrichment: {} -> {} basis functions over {} iterations{}",
        n_before,
        model.n_modes(),
        trace.iterations.len(),
        if trace.stopped_early {
            " (stopped early)"
        } else {
            ""
        }
    );
    Ok(())
}

fn cmd_compare(p: &Pipeline) -> Result<()> {
    let results = p.ws.join("results");
    let errors = std::fs::read_to_string(results.join("errors.csv"))
        .map_err(|e| Error::Data(format!("errors.csv: {e}")))?;
    let norms = std::fs::read_to_string(results.join("norms.csv"))
        .map_err(|e| Error::Data(format!("norms.csv: {e}")))?;
    let summary: serde_json::Value = serde_json::from_slice(
        &std::fs::read(results.join("summary.json"))
            .map_err(|e| Error::Data(format!("summary.json: {e}")))?,
    )
    .map_err(|e| Error::Data(format!("summary.json: {e}")))?;

    let (eh, ec) = metrics::parse_csv(&errors)?;
    let (nh, nc) = metrics::parse_csv(&norms)?;
    if eh != ["t", "eps_u", "eps_p", "dual_norm", "err_X"] || nh != ["t", "norm_u", "norm_p"] {
        return Err(Error::Data("unexpected CSV schema".into()));
    }
    let recompute = |eps: &[f64], nrm: &[f64]| -> f64 {
        let num: f64 = eps.iter().zip(nrm).map(|(e, n)| (e * n).powi(2)).sum();
        let den: f64 = nrm.iter().map(|n| n * n).sum();
        (num / den).sqrt()
    };
    let e_u = recompute(&ec[1], &nc[1]);
    let e_p = recompute(&ec[2], &nc[2]);
    let s_u = summary["e_n_u"].as_f64().unwrap_or(f64::NAN);
    let s_p = summary["e_n_p"].as_f64().unwrap_or(f64::NAN);
    let ok_u = (e_u - s_u).abs() <= 1e-12 * s_u.abs().max(1e-300);
    let ok_p = (e_p - s_p).abs() <= 1e-12 * s_p.abs().max(1e-300);
    println!("E_N(u): summary {s_u:.6e}, recomputed {e_u:.6e} -> {}", if ok_u { "match" } else { "MISMATCH" });
    println!("E_N(p): summary {s_p:.6e}, recomputed {e_p:.6e} -> {}", if ok_p { "match" } else { "MISMATCH" });
    if !(ok_u && ok_p) {
        return Err(Error::Data(
            "summary aggregates do not match the per-instant CSVs".into(),
        ));
    }
    let compare = serde_json::json!({
        "e_n_u_recomputed": e_u,
        "e_n_p_recomputed": e_p,
        "consistent": true,
    });
    atomic_write(
        &results.join("compare.json"),
        serde_json::to_vec_pretty(&compare).unwrap().as_slice(),
    )?;
    Ok(())
}

fn cmd_outputs(p: &Pipeline) -> Result<()> {
    let snap = p.load_snapshots()?;
    let results = p.dir("results")?;
    let rows = metrics::outputs_from_snapshots(&snap, &p.ops, &p.wall_areas())?;
    atomic_write(
        &results.join("outputs_fem.csv"),
        metrics::outputs_csv(&rows).as_bytes(),
    )?;
    let model_path = p.model_path();
    if model_path.exists() {
        let model = load_model(&model_path, &p.ops)?;
        let data = p.cfg.boundary_data();
        let n_steps = snap.stride * snap.n_samples();
        let traj =
            crate::rom::run_reduced_from(&model, &p.ops, &data, &snap, n_steps, snap.alpha)?;
        let rom_rows =
            metrics::outputs_from_rom(&traj, &model, &p.ops, snap.stride, &p.wall_areas())?;
        atomic_write(
            &results.join("outputs_rom.csv"),
            metrics::outputs_csv(&rom_rows).as_bytes(),
        )?;
        println!("wrote outputs_fem.csv and outputs_rom.csv");
    } else {
        println!("wrote outputs_fem.csv (no reduced model present)");
    }
    Ok(())
}
