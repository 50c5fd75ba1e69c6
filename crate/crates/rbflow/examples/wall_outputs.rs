//! Haemodynamic output functionals: outlet flow rate and averaged wall shear
//! stress, comparing the reduced model against the finite element truth at
//! every snapshot instant.
//!
//! ```text
//! cargo run --release --example wall_outputs
//! ```

use std::sync::Arc;

use rbflow::affine::AffineSystem;
use rbflow::fem::{assemble_constant_operators, profiles, signals, BoundaryData, PhysicalParams};
use rbflow::mesh::Mesh;
use rbflow::metrics::{self, WallArea};
use rbflow::{pod, rom};

fn main() -> rbflow::Result<()> {
    let (length, height) = (4.0, 1.0);
    let mesh = Arc::new(Mesh::build_channel(length, height, 12, 4)?);
    let space = Arc::new(rbflow::fem::FunctionSpace::new(mesh));
    let period = 0.8;
    let data = BoundaryData {
        g_d_profile: profiles::poiseuille(height, 5.0),
        sigma1: Box::new(move |t| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * t / period).cos())),
        g_n_profile: profiles::uniform([-10.0, 0.0]),
        sigma2: signals::offset_sine(1.0, period),
        period,
    };
    let params = PhysicalParams::blood_like(0.004);
    let ops = Arc::new(assemble_constant_operators(space, params, &data)?);
    let sys = AffineSystem::build(&ops);
    let n_steps = (period / params.dt).round() as usize;
    let snap = rbflow::hifi::run(&ops, &sys, &data, n_steps, 10, 0.0)?;

    let basis = pod::build_basis(&snap, &ops, 1e-5)?;
    let basis = pod::extend_with_state(basis, &ops, &snap.initial.u_tilde, &snap.initial.p)?;
    let model = rom::project_with_window(&sys, &ops, &basis, &snap.initial.d_s)?;
    let traj = rom::run_reduced_from(&model, &ops, &data, &snap, n_steps, 0.0)?;

    let areas = WallArea::default_pair(length);
    let fem_rows = metrics::outputs_from_snapshots(&snap, &ops, &areas)?;
    let rom_rows = metrics::outputs_from_rom(&traj, &model, &ops, snap.stride, &areas)?;

    println!("upstream-half wall shear stress, FEM vs reduced (N = {}):", model.n_modes());
    println!("    t      flow FEM   flow ROM   wss FEM    wss ROM");
    for (f, r) in fem_rows.iter().zip(&rom_rows) {
        println!(
            "  {:5.3}  {:9.4}  {:9.4}  {:9.5}  {:9.5}",
            f.t, f.flow_rate, r.flow_rate, f.wss[0], r.wss[0]
        );
    }

    let mut num = 0.0;
    let mut den = 0.0;
    for (f, r) in fem_rows.iter().zip(&rom_rows) {
        for a in 0..2 {
            num += (f.wss[a] - r.wss[a]).powi(2);
            den += f.wss[a].powi(2);
        }
    }
    println!(
        "\nrelative L2-in-time wall shear stress discrepancy: {:.3e}",
        (num / den).sqrt()
    );
    std::fs::create_dir_all("out")?;
    std::fs::write("out/outputs_fem.csv", metrics::outputs_csv(&fem_rows))?;
    std::fs::write("out/outputs_rom.csv", metrics::outputs_csv(&rom_rows))?;
    println!("tables written to out/outputs_fem.csv and out/outputs_rom.csv");
    Ok(())
}
