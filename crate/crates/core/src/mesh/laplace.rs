use std::collections::BTreeMap;

use super::{cross, dot, norm, sub, MeshError, TriangleMesh};
use crate::solvers::CsrMatrix;

/// Finite-volume cotangent discretisation `L = D^{-1} W`.
///
/// `weights` is the symmetric matrix `W` (off-diagonal cotangent weights, zero
/// row sums), `areas` the diagonal of `D` (barycentric cell areas).
#[derive(Debug, Clone)]
pub struct LaplaceOperator {
    weights: CsrMatrix,
    areas: Vec<f64>,
    total_area: f64,
}

impl LaplaceOperator {
    /// Builds from a prepared weight matrix and cell areas.
    pub fn from_parts(weights: CsrMatrix, areas: Vec<f64>) -> Result<Self, MeshError> {
        if !weights.is_square() || weights.nrows() != areas.len() {
            return Err(MeshError::Validation("weight matrix and areas disagree in size".into()));
        }
        if !weights.is_symmetric_exact() {
            return Err(MeshError::Validation("weight matrix is not symmetric".into()));
        }
        if let Some(i) = areas.iter().position(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(MeshError::IsolatedVertex { vertex: i });
        }
        let weights = weights
            .into_symmetric()
            .map_err(|e| MeshError::Validation(e.to_string()))?;
        let total_area = areas.iter().sum();
        Ok(Self { weights, areas, total_area })
    }

    pub fn weights(&self) -> &CsrMatrix {
        &self.weights
    }

    /// Diagonal of `D`.
    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn total_area(&self) -> f64 {
        self.total_area
    }

    pub fn dim(&self) -> usize {
        self.areas.len()
    }

    /// `L x = D^{-1} W x`
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.weights.mul_vec(x);
        for (yi, a) in y.iter_mut().zip(&self.areas) {
            *yi /= a;
        }
        y
    }

    /// `B = D^{-1/2} W D^{-1/2}`, symmetric and similar to `L`.
    pub fn symmetric_normalized(&self) -> CsrMatrix {
        let s: Vec<f64> = self.areas.iter().map(|a| 1.0 / a.sqrt()).collect();
        self.weights.scaled(&s, &s)
    }

    /// `D - c W`, the symmetric positive definite implicit-Euler matrix for `c > 0`.
    pub fn implicit_matrix(&self, c: f64) -> CsrMatrix {
        self.weights.scale_add_diagonal(-c, &self.areas)
    }

    /// Dense `L`, for oracles on small meshes.
    pub fn dense_operator(&self) -> nalgebra::DMatrix<f64> {
        let mut l = self.weights.to_dense();
        for (i, a) in self.areas.iter().enumerate() {
            l.row_mut(i).scale_mut(1.0 / a);
        }
        l
    }
}

/// Assembles cotangent weights and barycentric areas.
///
/// Each triangle contributes `cot(angle)/2` to the edge opposite each corner,
/// so interior edges collect both opposite angles and boundary edges one.
pub fn assemble_laplacian(mesh: &TriangleMesh) -> Result<LaplaceOperator, MeshError> {
    let n = mesh.num_vertices();
    let pts = mesh.vertices();
    let mut edge_w: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut areas = vec![0.0; n];

    for (t, tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.triangle_area(t);
        for k in 0..3 {
            let (c, a, b) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
            let (ea, eb) = (sub(pts[a], pts[c]), sub(pts[b], pts[c]));
            let cot = dot(ea, eb) / norm(cross(ea, eb));
            if !cot.is_finite() {
                return Err(MeshError::NonFiniteCotangent { triangle: t });
            }
            *edge_w.entry((a.min(b), a.max(b))).or_insert(0.0) += 0.5 * cot;
            areas[c] += area / 3.0;
        }
    }
    if let Some(v) = areas.iter().position(|&a| a <= 0.0) {
        return Err(MeshError::IsolatedVertex { vertex: v });
    }

    let mut diag = vec![0.0; n];
    let mut triplets = Vec::with_capacity(edge_w.len() * 2 + n);
    for (&(i, j), &w) in &edge_w {
        triplets.push((i, j, w));
        triplets.push((j, i, w));
        diag[i] -= w;
        diag[j] -= w;
    }
    triplets.extend(diag.iter().enumerate().map(|(i, &d)| (i, i, d)));
    let weights = CsrMatrix::from_triplets(n, n, &triplets)
        .map_err(|e| MeshError::Validation(e.to_string()))?;
    LaplaceOperator::from_parts(weights, areas)
}
