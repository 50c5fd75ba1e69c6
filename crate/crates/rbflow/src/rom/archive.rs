//! Reduced-model persistence: one versioned archive file holding a JSON
//! manifest and SNAP-format dense blocks. Loading refuses version or mesh
//! mismatches instead of guessing.

use std::path::Path;

use crate::error::{Error, Result};
use crate::fem::AssembledOperators;
use crate::snap::Archive;

use super::{BasisKind, ReducedModel, RieszCache, TermLayout};

fn kind_str(k: BasisKind) -> &'static str {
    match k {
        BasisKind::Velocity => "u",
        BasisKind::Pressure => "p",
        BasisKind::Supremizer => "s",
    }
}

fn kind_from(s: &str) -> Result<BasisKind> {
    match s {
        "u" => Ok(BasisKind::Velocity),
        "p" => Ok(BasisKind::Pressure),
        "s" => Ok(BasisKind::Supremizer),
        other => Err(Error::Data(format!("unknown basis kind `{other}`"))),
    }
}

/// Serialize a reduced model; byte-identical for identical inputs.
pub fn save_model(model: &ReducedModel, path: &Path) -> Result<()> {
    let kinds: Vec<&str> = model.kinds.iter().map(|&k| kind_str(k)).collect();
    let manifest = serde_json::json!({
        "kind": "reduced-model",
        "version": 1,
        "n_u": model.space.n_u,
        "n_p": model.space.n_p,
        "n_modes": model.n_modes(),
        "kinds": kinds,
        "params": model.params,
        "mesh_hash": format!("{:016x}", model.mesh_hash),
        "pod_tol": model.pod_tol,
        "counts": {
            "velocity": model.n_velocity,
            "pressure": model.n_pressure,
            "supremizer": model.n_supremizer,
        },
    });
    let mut a = Archive::new(manifest);
    a.push_matrix("basis", &model.basis);
    a.push_matrix("a0_n", &model.a0_n);
    a.push_matrix("conv_lift_n", &model.conv_lift_n);
    a.push_matrix("m_time_n", &model.m_time_n);
    a.push_matrix("k_gamma_n", &model.k_gamma_n);
    a.push_matrix("gram", &model.riesz.gram);
    a.push_col("f_n_n", &model.f_n_n);
    a.push_col("m_lift_n", &model.m_lift_n);
    a.push_col("a0_lift_n", &model.a0_lift_n);
    a.push_col("conv_ll_n", &model.conv_ll_n);
    a.push_col("lift_proj", &model.lift_proj);
    a.push_col("window_d0", &model.window_d0);
    a.push_col("d0_load_n", &model.d0_load_n);
    for (i, m) in model.conv_n.iter().enumerate() {
        if let Some(m) = m {
            a.push_matrix(&format!("conv_{i}"), m);
        }
    }
    for (i, v) in model.conv_lift_vec_n.iter().enumerate() {
        if let Some(v) = v {
            a.push_col(&format!("convvec_{i}"), v);
        }
    }
    a.write(path)
}

/// Load a model saved by [`save_model`], checking version, dimensions, and
/// the mesh provenance hash against the supplied operators.
pub fn load_model(path: &Path, ops: &AssembledOperators) -> Result<ReducedModel> {
    let a = Archive::read(path)?;
    let m = &a.manifest;
    if m["kind"] != "reduced-model" || m["version"] != 1 {
        return Err(Error::Data(format!(
            "not a version-1 reduced model archive: {}",
            path.display()
        )));
    }
    let n_u = m["n_u"].as_u64().unwrap_or(0) as usize;
    let n_p = m["n_p"].as_u64().unwrap_or(0) as usize;
    if n_u != ops.space.n_u || n_p != ops.space.n_p {
        return Err(Error::Data(format!(
            "model dimensions ({n_u}, {n_p}) do not match the mesh ({}, {})",
            ops.space.n_u, ops.space.n_p
        )));
    }
    let mesh_hash = u64::from_str_radix(m["mesh_hash"].as_str().unwrap_or(""), 16)
        .map_err(|_| Error::Data("bad mesh hash in manifest".into()))?;
    if mesh_hash != ops.space.mesh.content_hash() {
        return Err(Error::Data(
            "model was built on a different mesh (hash mismatch)".into(),
        ));
    }
    let kinds: Vec<BasisKind> = m["kinds"]
        .as_array()
        .ok_or_else(|| Error::Data("manifest kinds missing".into()))?
        .iter()
        .map(|v| kind_from(v.as_str().unwrap_or("?")))
        .collect::<Result<_>>()?;
    let params: crate::fem::PhysicalParams = serde_json::from_value(m["params"].clone())
        .map_err(|e| Error::Data(format!("manifest params: {e}")))?;

    let n_modes = kinds.len();
    let mut conv_n = Vec::with_capacity(n_modes);
    let mut conv_lift_vec_n = Vec::with_capacity(n_modes);
    for (i, k) in kinds.iter().enumerate() {
        if *k == BasisKind::Pressure {
            conv_n.push(None);
            conv_lift_vec_n.push(None);
        } else {
            conv_n.push(Some(a.matrix(&format!("conv_{i}"))?));
            conv_lift_vec_n.push(Some(a.col(&format!("convvec_{i}"))?));
        }
    }

    let gram = a.matrix("gram")?;
    let layout = TermLayout { n_modes };
    if gram.nrows() != layout.total() {
        return Err(Error::Data(format!(
            "Riesz Gram has {} rows, layout wants {}",
            gram.nrows(),
            layout.total()
        )));
    }

    let model = ReducedModel {
        space: ops.space.clone(),
        params,
        basis: a.matrix("basis")?,
        kinds,
        a0_n: a.matrix("a0_n")?,
        conv_lift_n: a.matrix("conv_lift_n")?,
        m_time_n: a.matrix("m_time_n")?,
        k_gamma_n: a.matrix("k_gamma_n")?,
        conv_n,
        conv_lift_vec_n,
        f_n_n: a.col("f_n_n")?,
        m_lift_n: a.col("m_lift_n")?,
        a0_lift_n: a.col("a0_lift_n")?,
        conv_ll_n: a.col("conv_ll_n")?,
        lift_proj: a.col("lift_proj")?,
        window_d0: a.col("window_d0")?,
        d0_load_n: a.col("d0_load_n")?,
        riesz: RieszCache { layout, gram },
        mesh_hash,
        pod_tol: m["pod_tol"].as_f64().unwrap_or(0.0),
        n_velocity: m["counts"]["velocity"].as_u64().unwrap_or(0) as usize,
        n_pressure: m["counts"]["pressure"].as_u64().unwrap_or(0) as usize,
        n_supremizer: m["counts"]["supremizer"].as_u64().unwrap_or(0) as usize,
    };
    if model.basis.nrows() != ops.space.n_total() || model.basis.ncols() != n_modes {
        return Err(Error::Data("basis block shape mismatch".into()));
    }
    Ok(model)
}
