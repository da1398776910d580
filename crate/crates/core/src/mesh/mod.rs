//! Triangle meshes, file ingestion and the finite-volume Laplace-Beltrami operator.

mod io;
mod laplace;
pub mod shapes;

use std::collections::HashMap;

pub use io::{load_mesh, parse_off, parse_vert_tri, write_off, MeshFormat};
pub use laplace::{assemble_laplacian, LaplaceOperator};

/// Errors raised while reading, validating or assembling a mesh.
#[derive(Debug, thiserror::Error)]
pub enum MeshError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("triangle {triangle} produced a non-finite cotangent weight")]
    NonFiniteCotangent { triangle: usize },
    #[error("vertex {vertex} is not referenced by any triangle; its cell area would be zero")]
    IsolatedVertex { vertex: usize },
}

pub(crate) fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

/// A triangulated surface: vertex positions plus index triples.
///
/// Construction validates that every index is in range, that no triangle
/// repeats a vertex and that no edge is shared by more than two triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<[f64; 3]>,
    triangles: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<[f64; 3]>, triangles: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let n = vertices.len();
        if let Some(i) = vertices.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(MeshError::Validation(format!("vertex {i} has a non-finite coordinate")));
        }
        for (t, tri) in triangles.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&v| v >= n) {
                return Err(MeshError::Validation(format!(
                    "triangle {t} references vertex {bad}, but the mesh has {n} vertices"
                )));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(MeshError::Validation(format!(
                    "triangle {t} repeats a vertex: {tri:?}"
                )));
            }
        }
        let mesh = Self { vertices, triangles };
        for (edge, count) in mesh.edge_face_counts() {
            if count > 2 {
                return Err(MeshError::Validation(format!(
                    "edge ({}, {}) is shared by {count} triangles",
                    edge.0, edge.1
                )));
            }
        }
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i]);
        0.5 * norm(cross(sub(b, a), sub(c, a)))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Length of the bounding-box diagonal.
    pub fn bounding_box_diagonal(&self) -> f64 {
        if self.vertices.is_empty() {
            return 0.0;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &self.vertices {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        norm(sub(hi, lo))
    }

    /// Undirected edges `(i, j)` with `i < j`, mapped to their incident triangle count.
    pub fn edge_face_counts(&self) -> HashMap<(usize, usize), usize> {
        let mut counts = HashMap::with_capacity(self.triangles.len() * 3 / 2 + 1);
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Edges with exactly one incident triangle, sorted.
    pub fn boundary_edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<_> = self
            .edge_face_counts()
            .into_iter()
            .filter_map(|(e, c)| (c == 1).then_some(e))
            .collect();
        edges.sort_unstable();
        edges
    }

    pub fn is_closed(&self) -> bool {
        self.edge_face_counts().values().all(|&c| c == 2)
    }

    /// Sorted, deduplicated neighbour lists.
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Default degenerate-area tolerance: `1e-12 * diag^2`.
    pub fn default_area_tolerance(&self) -> f64 {
        let d = self.bounding_box_diagonal();
        1e-12 * d * d
    }
}

/// Keeps exactly the triangles whose area exceeds `area_tol`; vertices are untouched.
pub fn remove_degenerate_triangles(mesh: &TriangleMesh, area_tol: f64) -> TriangleMesh {
    let triangles: Vec<[usize; 3]> = (0..mesh.num_triangles())
        .filter(|&t| mesh.triangle_area(t) > area_tol)
        .map(|t| mesh.triangles[t])
        .collect();
    let removed = mesh.num_triangles() - triangles.len();
    if removed > 0 {
        log::info!("removed {removed} degenerate triangle(s)");
    }
    if triangles.is_empty() && mesh.num_triangles() > 0 {
        log::warn!("every triangle fell below the area tolerance {area_tol:e}");
    }
    TriangleMesh { vertices: mesh.vertices.clone(), triangles }
}
