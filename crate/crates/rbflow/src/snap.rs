//! On-disk formats: SNAP dense-matrix files, snapshot sidecars, the reduced
//! model archive, and coordinate-triplet text export for oracle cross-checks.
//!
//! SNAP layout: magic `SNAP`, little-endian `u32` version (currently 1),
//! `u64` row and column counts, then the column-major IEEE-754 `f64` payload.
//! Everything written here is byte-deterministic for identical inputs.

use std::io::{Read, Write};
use std::path::Path;

use faer::prelude::*;
use faer::sparse::SparseColMat;

use crate::error::{Error, Result};
use crate::fem::PhysicalParams;
use crate::hifi::{SnapshotSet, WindowStart};

pub const SNAP_MAGIC: &[u8; 4] = b"SNAP";
pub const SNAP_VERSION: u32 = 1;
pub const ARCHIVE_MAGIC: &[u8; 4] = b"ROMA";
pub const ARCHIVE_VERSION: u32 = 1;

/// Serialize a dense matrix in the SNAP byte layout.
pub fn matrix_to_bytes(m: &Mat<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + 8 * m.nrows() * m.ncols());
    out.extend_from_slice(SNAP_MAGIC);
    out.extend_from_slice(&SNAP_VERSION.to_le_bytes());
    out.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            out.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
    out
}

pub fn matrix_from_bytes(bytes: &[u8]) -> Result<Mat<f64>> {
    if bytes.len() < 24 || &bytes[0..4] != SNAP_MAGIC {
        return Err(Error::Data("not a SNAP matrix file".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != SNAP_VERSION {
        return Err(Error::Data(format!(
            "SNAP version {version} not supported (expected {SNAP_VERSION})"
        )));
    }
    let nrows = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let ncols = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    let need = 24usize
        .checked_add(8usize.checked_mul(nrows.checked_mul(ncols).ok_or_else(too_big)?).ok_or_else(too_big)?)
        .ok_or_else(too_big)?;
    if bytes.len() != need {
        return Err(Error::Data(format!(
            "SNAP payload has {} bytes, expected {need}",
            bytes.len()
        )));
    }
    let mut m = Mat::zeros(nrows, ncols);
    let mut off = 24;
    for j in 0..ncols {
        for i in 0..nrows {
            m[(i, j)] = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
            off += 8;
        }
    }
    Ok(m)
}

fn too_big() -> Error {
    Error::Data("SNAP dimensions overflow".into())
}

pub fn write_matrix(path: &Path, m: &Mat<f64>) -> Result<()> {
    atomic_write(path, &matrix_to_bytes(m))
}

pub fn read_matrix(path: &Path) -> Result<Mat<f64>> {
    matrix_from_bytes(&std::fs::read(path)?)
}

pub fn col_to_mat(c: &Col<f64>) -> Mat<f64> {
    Mat::from_fn(c.nrows(), 1, |i, _| c[i])
}

pub fn mat_to_col(m: &Mat<f64>) -> Result<Col<f64>> {
    if m.ncols() != 1 {
        return Err(Error::Data(format!(
            "expected a single-column matrix, got {} columns",
            m.ncols()
        )));
    }
    Ok(Col::from_fn(m.nrows(), |i| m[(i, 0)]))
}

/// Write through a temp file and rename, so partial writes never land.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Snapshot metadata stored next to the SNAP payload files.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct SnapshotSidecar {
    pub times: Vec<f64>,
    pub stride: usize,
    pub params: PhysicalParams,
    pub mesh_hash: String,
    pub dirichlet_scale: Vec<f64>,
    pub alpha: f64,
    /// Time and lifting coefficient at the recorded-window start.
    pub t0: f64,
    pub initial_scale: f64,
}

/// Write a snapshot set as `velocity.snap`, `pressure.snap`, `meta.json`.
pub fn write_snapshots(
    dir: &Path,
    snap: &SnapshotSet,
    params: &PhysicalParams,
    mesh_hash: u64,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_matrix(&dir.join("velocity.snap"), &snap.u)?;
    write_matrix(&dir.join("pressure.snap"), &snap.p)?;
    // window-start state: velocity and displacement side by side, pressure
    let n_u = snap.u.nrows();
    let init_vel = Mat::from_fn(n_u, 2, |i, j| {
        if j == 0 {
            snap.initial.u_tilde[i]
        } else {
            snap.initial.d_s[i]
        }
    });
    write_matrix(&dir.join("initial_velocity.snap"), &init_vel)?;
    write_matrix(&dir.join("initial_pressure.snap"), &col_to_mat(&snap.initial.p))?;
    let side = SnapshotSidecar {
        times: snap.times.clone(),
        stride: snap.stride,
        params: *params,
        mesh_hash: format!("{mesh_hash:016x}"),
        dirichlet_scale: snap.dirichlet_scale.clone(),
        alpha: snap.alpha,
        t0: snap.initial.t,
        initial_scale: snap.initial.dirichlet_scale,
    };
    let json = serde_json::to_vec_pretty(&side).expect("sidecar serialization");
    atomic_write(&dir.join("meta.json"), &json)?;
    Ok(())
}

/// Read a snapshot set written by [`write_snapshots`].
pub fn read_snapshots(dir: &Path) -> Result<(SnapshotSet, SnapshotSidecar)> {
    let u = read_matrix(&dir.join("velocity.snap"))?;
    let p = read_matrix(&dir.join("pressure.snap"))?;
    let side: SnapshotSidecar = serde_json::from_slice(&std::fs::read(dir.join("meta.json"))?)
        .map_err(|e| Error::Data(format!("snapshot sidecar: {e}")))?;
    if u.ncols() != side.times.len() || p.ncols() != side.times.len() {
        return Err(Error::Data(format!(
            "snapshot columns ({} velocity, {} pressure) disagree with {} times",
            u.ncols(),
            p.ncols(),
            side.times.len()
        )));
    }
    if u.ncols() == 0 {
        return Err(Error::Data("snapshot set is empty".into()));
    }
    let init_vel = read_matrix(&dir.join("initial_velocity.snap"))?;
    let init_p = mat_to_col(&read_matrix(&dir.join("initial_pressure.snap"))?)?;
    if init_vel.nrows() != u.nrows() || init_vel.ncols() != 2 || init_p.nrows() != p.nrows() {
        return Err(Error::Data("window-start state has wrong shape".into()));
    }
    let initial = WindowStart {
        u_tilde: Col::from_fn(u.nrows(), |i| init_vel[(i, 0)]),
        d_s: Col::from_fn(u.nrows(), |i| init_vel[(i, 1)]),
        p: init_p,
        t: side.t0,
        dirichlet_scale: side.initial_scale,
    };
    let snap = SnapshotSet {
        times: side.times.clone(),
        u,
        p,
        stride: side.stride,
        dirichlet_scale: side.dirichlet_scale.clone(),
        alpha: side.alpha,
        initial,
    };
    Ok((snap, side))
}

/// Coordinate-triplet text form of a sparse matrix (`row col value`, 17
/// significant digits), for external oracle cross-checks.
pub fn triplet_text(sp: &SparseColMat<usize, f64>) -> String {
    use std::fmt::Write as _;
    let mut rows = Vec::new();
    crate::sparse::for_each_entry(sp, |i, j, v| rows.push((i, j, v)));
    rows.sort_by_key(|&(i, j, _)| (i, j));
    let mut s = String::new();
    for (i, j, v) in rows {
        writeln!(s, "{i} {j} {v:.16e}").unwrap();
    }
    s
}

/// A named-block archive: JSON manifest plus SNAP payload blocks in one file.
pub struct Archive {
    pub manifest: serde_json::Value,
    pub blocks: Vec<(String, Vec<u8>)>,
}

impl Archive {
    pub fn new(manifest: serde_json::Value) -> Archive {
        Archive {
            manifest,
            blocks: Vec::new(),
        }
    }

    pub fn push_matrix(&mut self, name: &str, m: &Mat<f64>) {
        self.blocks.push((name.to_string(), matrix_to_bytes(m)));
    }

    pub fn push_col(&mut self, name: &str, c: &Col<f64>) {
        self.push_matrix(name, &col_to_mat(c));
    }

    pub fn matrix(&self, name: &str) -> Result<Mat<f64>> {
        let (_, bytes) = self
            .blocks
            .iter()
            .find(|(n, _)| n == name)
            .ok_or_else(|| Error::Data(format!("archive block `{name}` missing")))?;
        matrix_from_bytes(bytes)
    }

    pub fn col(&self, name: &str) -> Result<Col<f64>> {
        mat_to_col(&self.matrix(name)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        out.extend_from_slice(ARCHIVE_MAGIC);
        out.extend_from_slice(&ARCHIVE_VERSION.to_le_bytes());
        let manifest = serde_json::to_vec(&self.manifest).expect("manifest serialization");
        out.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
        out.extend_from_slice(&manifest);
        out.extend_from_slice(&(self.blocks.len() as u64).to_le_bytes());
        for (name, bytes) in &self.blocks {
            out.extend_from_slice(&(name.len() as u64).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(bytes.len() as u64).to_le_bytes());
            out.extend_from_slice(bytes);
        }
        atomic_write(path, &out)
    }

    pub fn read(path: &Path) -> Result<Archive> {
        let mut f = std::fs::File::open(path)?;
        let mut bytes = Vec::new();
        f.read_to_end(&mut bytes)?;
        let mut off = 0usize;
        let take = |off: &mut usize, k: usize| -> Result<std::ops::Range<usize>> {
            if *off + k > bytes.len() {
                return Err(Error::Data("truncated archive".into()));
            }
            let r = *off..*off + k;
            *off += k;
            Ok(r)
        };
        if &bytes[take(&mut off, 4)?] != ARCHIVE_MAGIC {
            return Err(Error::Data("not a model archive".into()));
        }
        let version = u32::from_le_bytes(bytes[take(&mut off, 4)?].try_into().unwrap());
        if version != ARCHIVE_VERSION {
            return Err(Error::Data(format!(
                "archive version {version} not supported (expected {ARCHIVE_VERSION})"
            )));
        }
        let mlen = u64::from_le_bytes(bytes[take(&mut off, 8)?].try_into().unwrap()) as usize;
        let manifest: serde_json::Value = serde_json::from_slice(&bytes[take(&mut off, mlen)?])
            .map_err(|e| Error::Data(format!("archive manifest: {e}")))?;
        let nblocks = u64::from_le_bytes(bytes[take(&mut off, 8)?].try_into().unwrap()) as usize;
        let mut blocks = Vec::with_capacity(nblocks.min(1024));
        for _ in 0..nblocks {
            let nlen = u64::from_le_bytes(bytes[take(&mut off, 8)?].try_into().unwrap()) as usize;
            let name = String::from_utf8(bytes[take(&mut off, nlen)?].to_vec())
                .map_err(|_| Error::Data("archive block name is not UTF-8".into()))?;
            let blen = u64::from_le_bytes(bytes[take(&mut off, 8)?].try_into().unwrap()) as usize;
            blocks.push((name, bytes[take(&mut off, blen)?].to_vec()));
        }
        if off != bytes.len() {
            return Err(Error::Data("trailing bytes after archive blocks".into()));
        }
        Ok(Archive { manifest, blocks })
    }
}

/// Exclusive workspace lock file; removed on drop.
pub struct WorkspaceLock {
    path: std::path::PathBuf,
}

impl WorkspaceLock {
    pub fn acquire(dir: &Path) -> Result<WorkspaceLock> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(".lock");
        match std::fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
        {
            Ok(mut f) => {
                let _ = writeln!(f, "pid {}", std::process::id());
                Ok(WorkspaceLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Data(format!(
                "workspace is locked by another command (remove {} if stale)",
                path.display()
            ))),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for WorkspaceLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}
