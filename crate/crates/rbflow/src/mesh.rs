//! 2D channel triangulation with tagged boundary parts.
//!
//! The mesh is a structured crossed-triangle grid of a rectangular channel:
//! every cell is split into two triangles whose diagonal alternates in a
//! checkerboard pattern. Node ordering is row-major, so exports are
//! bit-stable across runs.
//!
//! Boundary convention:
//! - left side: inlet (Dirichlet velocity),
//! - right side: outlet (Neumann traction),
//! - top and bottom: compliant wall (generalized Robin condition).

use crate::error::{Error, Result};

/// Boundary part a tagged edge belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum BoundaryTag {
    DirichletInlet,
    NeumannOutlet,
    RobinWall,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 3] = [
        BoundaryTag::DirichletInlet,
        BoundaryTag::NeumannOutlet,
        BoundaryTag::RobinWall,
    ];

    fn short(self) -> &'static str {
        match self {
            BoundaryTag::DirichletInlet => "INLET",
            BoundaryTag::NeumannOutlet => "OUTLET",
            BoundaryTag::RobinWall => "WALL",
        }
    }
}

/// One boundary edge: endpoint vertex ids, owning triangle, tag.
#[derive(Clone, Copy, Debug)]
pub struct BoundaryEdge {
    /// Endpoints oriented counter-clockwise around the domain,
    /// i.e. matching the owner triangle's orientation.
    pub vertices: (usize, usize),
    /// The single triangle this edge belongs to.
    pub triangle: usize,
    pub tag: BoundaryTag,
}

/// Immutable triangulation of the channel. Safe to share across threads.
#[derive(Clone, Debug)]
pub struct Mesh {
    /// Vertex coordinates in cm.
    pub vertices: Vec<[f64; 2]>,
    /// Counter-clockwise vertex index triples.
    pub triangles: Vec<[usize; 3]>,
    /// Tagged boundary edges; each belongs to exactly one triangle.
    pub boundary_edges: Vec<BoundaryEdge>,
    /// Channel dimensions used to build the mesh.
    pub length: f64,
    pub height: f64,
}

impl Mesh {
    /// Build a structured crossed-triangle mesh of a `length x height`
    /// channel with `nx x ny` cells: `(nx+1)(ny+1)` vertices and
    /// `2 nx ny` triangles.
    pub fn build_channel(length: f64, height: f64, nx: usize, ny: usize) -> Result<Mesh> {
        if !(length > 0.0) || !(height > 0.0) {
            return Err(Error::invalid(format!(
                "channel dimensions must be positive, got {length} x {height}"
            )));
        }
        if nx < 2 || ny < 2 {
            return Err(Error::invalid(format!(
                "cell counts must be at least 2, got {nx} x {ny}"
            )));
        }

        let dx = length / nx as f64;
        let dy = height / ny as f64;
        let vid = |i: usize, j: usize| j * (nx + 1) + i;

        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push([i as f64 * dx, j as f64 * dy]);
            }
        }

        // Two CCW triangles per cell; the diagonal alternates per parity of
        // (i + j) so the pattern is symmetric under reflection.
        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (a, b, c, d) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
                if (i + j) % 2 == 0 {
                    // diagonal a-c
                    triangles.push([a, b, c]);
                    triangles.push([a, c, d]);
                } else {
                    // diagonal b-d
                    triangles.push([a, b, d]);
                    triangles.push([b, c, d]);
                }
            }
        }

        let mesh_wo_edges = Mesh {
            vertices,
            triangles,
            boundary_edges: Vec::new(),
            length,
            height,
        };

        // Owner lookup for boundary edges: map CCW-oriented vertex pairs to
        // their triangle.
        let mut owner = std::collections::HashMap::new();
        for (t, tri) in mesh_wo_edges.triangles.iter().enumerate() {
            for k in 0..3 {
                owner.insert((tri[k], tri[(k + 1) % 3]), t);
            }
        }
        let find_owner = |a: usize, b: usize| -> usize {
            *owner
                .get(&(a, b))
                .or_else(|| owner.get(&(b, a)))
                .expect("boundary edge must have an owner triangle")
        };

        let mut boundary_edges = Vec::new();
        // bottom row, left to right
        for i in 0..nx {
            let (a, b) = (vid(i, 0), vid(i + 1, 0));
            boundary_edges.push(BoundaryEdge {
                vertices: (a, b),
                triangle: find_owner(a, b),
                tag: BoundaryTag::RobinWall,
            });
        }
        // top row, left to right
        for i in 0..nx {
            let (a, b) = (vid(i + 1, ny), vid(i, ny));
            boundary_edges.push(BoundaryEdge {
                vertices: (a, b),
                triangle: find_owner(a, b),
                tag: BoundaryTag::RobinWall,
            });
        }
        // left column, bottom to top
        for j in 0..ny {
            let (a, b) = (vid(0, j + 1), vid(0, j));
            boundary_edges.push(BoundaryEdge {
                vertices: (a, b),
                triangle: find_owner(a, b),
                tag: BoundaryTag::DirichletInlet,
            });
        }
        // right column, bottom to top
        for j in 0..ny {
            let (a, b) = (vid(nx, j), vid(nx, j + 1));
            boundary_edges.push(BoundaryEdge {
                vertices: (a, b),
                triangle: find_owner(a, b),
                tag: BoundaryTag::NeumannOutlet,
            });
        }

        Ok(Mesh {
            boundary_edges,
            ..mesh_wo_edges
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Signed area of triangle `t`; positive for CCW orientation.
    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (p, q, r) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
    }

    pub fn edge_length(&self, e: &BoundaryEdge) -> f64 {
        let (a, b) = e.vertices;
        let (p, q) = (self.vertices[a], self.vertices[b]);
        ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt()
    }

    /// Total length of all edges carrying `tag`, in cm.
    pub fn boundary_measure(&self, tag: BoundaryTag) -> f64 {
        self.boundary_edges
            .iter()
            .filter(|e| e.tag == tag)
            .map(|e| self.edge_length(e))
            .sum()
    }

    /// Plain-text export: `VERTICES n TRIANGLES m EDGES k` header, then
    /// coordinate, connectivity, and tagged-edge rows in deterministic order.
    pub fn export_text(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        writeln!(
            s,
            "VERTICES {} TRIANGLES {} EDGES {}",
            self.n_vertices(),
            self.n_triangles(),
            self.boundary_edges.len()
        )
        .unwrap();
        for v in &self.vertices {
            writeln!(s, "{:.16e} {:.16e}", v[0], v[1]).unwrap();
        }
        for t in &self.triangles {
            writeln!(s, "{} {} {}", t[0], t[1], t[2]).unwrap();
        }
        for e in &self.boundary_edges {
            writeln!(s, "{} {} {}", e.vertices.0, e.vertices.1, e.tag.short()).unwrap();
        }
        s
    }

    /// FNV-1a hash of the exported text; used to tie snapshot files to the
    /// mesh they were computed on.
    pub fn content_hash(&self) -> u64 {
        fnv1a(self.export_text().as_bytes())
    }
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
