//! Split POD of a snapshot run: eigenvalue decay of both fields, mode counts
//! across tolerances, and the supremizer residual check.
//!
//! ```text
//! cargo run --release --example pod_spectrum
//! ```

use std::sync::Arc;

use rbflow::affine::AffineSystem;
use rbflow::fem::{assemble_constant_operators, profiles, signals, BoundaryData, PhysicalParams};
use rbflow::mesh::Mesh;
use rbflow::pod;

fn main() -> rbflow::Result<()> {
    let height = 1.0;
    let mesh = Arc::new(Mesh::build_channel(3.0, height, 10, 4)?);
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
    let snap = rbflow::hifi::run(&ops, &sys, &data, n_steps, 5, 0.0)?;
    println!("{} snapshots collected", snap.n_samples());

    let gram = pod::compute_gramians(&snap, &ops.x_u, &ops.x_p)?;
    let eig_u = pod::eigendecompose(&gram.g_u);
    let eig_p = pod::eigendecompose(&gram.g_p);
    println!("\nleading normalized eigenvalues (velocity | pressure):");
    for k in 0..12.min(eig_u.values.len()) {
        println!(
            "  {:2}  {:10.3e}  |  {:10.3e}",
            k + 1,
            eig_u.values[k] / eig_u.values[0],
            eig_p.values[k] / eig_p.values[0].max(1e-300)
        );
    }

    println!("\nmode counts per energy tolerance (N = N_u + 2 N_p):");
    for tol in [1e-2, 1e-3, 1e-4, 1e-5, 1e-6] {
        let basis = pod::build_basis(&snap, &ops, tol)?;
        println!(
            "  tol {tol:7.0e}: {} velocity + {} pressure (+{} supremizers) = {}",
            basis.n_velocity(),
            basis.n_pressure(),
            basis.n_pressure(),
            basis.total()
        );
    }

    // supremizers solve the constrained Riesz problem against the pressure
    // divergence functionals; verify the free-dof residual of the first one
    let basis = pod::build_basis(&snap, &ops, 1e-5)?;
    let raw = pod::compute_supremizers(&ops, &basis.pressure_modes)?;
    let sigma = raw.col(0).to_owned();
    let p0 = basis.pressure_modes.col(0).to_owned();
    let rhs = rbflow::fem::supremizer_rhs(&ops.b, &p0);
    let xs = &ops.x_u * &sigma;
    let mut res = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..ops.space.n_u {
        if !ops.space.dirichlet_mask[i] {
            res += (xs[i] - rhs[i]).powi(2);
            scale += rhs[i].powi(2);
        }
    }
    println!(
        "\nfirst supremizer residual |X_u s - B^T p| / |B^T p| = {:.2e} on free dofs",
        res.sqrt() / scale.sqrt()
    );
    Ok(())
}
