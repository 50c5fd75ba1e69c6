//! Run the high-fidelity solver over two heartbeats and store the snapshot
//! files: one warm-up period from rest, then a recorded period sampled every
//! fifth step.
//!
//! ```text
//! cargo run --release --example hifi_snapshots
//! ```

use std::sync::Arc;

use rbflow::affine::AffineSystem;
use rbflow::fem::{assemble_constant_operators, profiles, signals, BoundaryData, PhysicalParams};
use rbflow::hifi;
use rbflow::mesh::Mesh;
use rbflow::metrics::{self, WallArea};

fn main() -> rbflow::Result<()> {
    let (length, height) = (4.0, 1.0);
    let mesh = Arc::new(Mesh::build_channel(length, height, 12, 4)?);
    let space = Arc::new(rbflow::fem::FunctionSpace::new(mesh));
    let period = 0.8;
    let peak = 5.0;
    let data = BoundaryData {
        g_d_profile: profiles::poiseuille(height, peak),
        // pulsatile inflow that starts from rest
        sigma1: Box::new(move |t| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * t / period).cos())),
        g_n_profile: profiles::uniform([-10.0, 0.0]),
        sigma2: signals::offset_sine(1.0, period),
        period,
    };
    let params = PhysicalParams::blood_like(0.004);
    let ops = Arc::new(assemble_constant_operators(space, params, &data)?);
    let sys = AffineSystem::build(&ops);

    // peak flow rate of the parabolic inlet profile and the matching
    // Reynolds number (diameter taken as the channel height)
    let q_peak = 2.0 / 3.0 * peak * height;
    println!(
        "inlet peak {peak} cm/s -> Q {q_peak:.2} cm^2/s, Re = {:.0}",
        hifi::reynolds(&params, q_peak, height)
    );

    let n_steps = (period / params.dt).round() as usize;
    println!("stepping {n_steps} warm-up + {n_steps} recorded steps at dt = {} s", params.dt);
    let t0 = std::time::Instant::now();
    let snap = hifi::run(&ops, &sys, &data, n_steps, 5, 0.0)?;
    println!(
        "recorded {} snapshots of dimension ({} velocity, {} pressure) in {:.2?}",
        snap.n_samples(),
        snap.u.nrows(),
        snap.p.nrows(),
        t0.elapsed()
    );

    let out = std::path::Path::new("out/snapshots");
    rbflow::snap::write_snapshots(out, &snap, &params, ops.space.mesh.content_hash())?;
    println!("snapshot files written under {}", out.display());

    let areas = WallArea::default_pair(length);
    let rows = metrics::outputs_from_snapshots(&snap, &ops, &areas)?;
    let csv = metrics::outputs_csv(&rows);
    std::fs::write("out/outputs_fem.csv", &csv)?;
    let peak_row = rows
        .iter()
        .max_by(|a, b| a.flow_rate.partial_cmp(&b.flow_rate).unwrap())
        .unwrap();
    println!(
        "peak outlet flow {:.3} cm^2/s at t = {:.3} s; wall shear stress {:.3} / {:.3} dyn/cm^2",
        peak_row.flow_rate, peak_row.t, peak_row.wss[0], peak_row.wss[1]
    );
    Ok(())
}
