use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::mesh::TriangleMesh;

use super::CorrespondError;

/// Edge graph of a mesh weighted by Euclidean edge length.
#[derive(Debug, Clone)]
pub struct EdgeGraph {
    adj: Vec<Vec<(usize, f64)>>,
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    // min-heap on distance, then on index
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl EdgeGraph {
    pub fn new(mesh: &TriangleMesh) -> Self {
        let pts = mesh.vertices();
        let adj = mesh
            .vertex_neighbors()
            .into_iter()
            .enumerate()
            .map(|(i, nb)| {
                nb.into_iter()
                    .map(|j| {
                        let d = crate::mesh::norm(crate::mesh::sub(pts[i], pts[j]));
                        (j, d)
                    })
                    .collect()
            })
            .collect();
        Self { adj }
    }

    /// Graph with explicit weighted undirected edges.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self, CorrespondError> {
        let mut adj = vec![Vec::new(); n];
        for &(a, b, w) in edges {
            if a >= n || b >= n {
                return Err(CorrespondError::Vertex { vertex: a.max(b), n });
            }
            if !(w >= 0.0) {
                return Err(CorrespondError::Dimension(format!("edge weight {w} must be non-negative")));
            }
            adj[a].push((b, w));
            adj[b].push((a, w));
        }
        Ok(Self { adj })
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    /// Dijkstra from `source`; stops once `target` is settled or every
    /// remaining vertex is farther than `radius`.
    fn dijkstra(&self, source: usize, target: Option<usize>, radius: f64) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.adj.len()];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(Entry(0.0, source));
        while let Some(Entry(d, u)) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            if d > radius || Some(u) == target {
                break;
            }
            for &(v, w) in &self.adj[u] {
                let nd = d + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(Entry(nd, v));
                }
            }
        }
        dist
    }

    fn check(&self, v: usize) -> Result<(), CorrespondError> {
        if v >= self.adj.len() {
            return Err(CorrespondError::Vertex { vertex: v, n: self.adj.len() });
        }
        Ok(())
    }

    pub fn distances_from(&self, source: usize) -> Result<Vec<f64>, CorrespondError> {
        self.check(source)?;
        let d = self.dijkstra(source, None, f64::INFINITY);
        let unreached = d.iter().filter(|x| x.is_infinite()).count();
        if unreached > 0 {
            log::warn!("{unreached} vertices unreachable from vertex {source}");
        }
        Ok(d)
    }

    /// Shortest-path length between two vertices (`+inf` if disconnected).
    pub fn distance(&self, a: usize, b: usize) -> Result<f64, CorrespondError> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.dijkstra(a, Some(b), f64::INFINITY)[b])
    }

    /// Vertices within `radius` of `source`, including `source`.
    pub fn ball(&self, source: usize, radius: f64) -> Result<Vec<usize>, CorrespondError> {
        self.check(source)?;
        let d = self.dijkstra(source, None, radius);
        Ok((0..d.len()).filter(|&i| d[i] <= radius).collect())
    }
}

/// Graph-geodesic distances from `source` to every vertex.
pub fn geodesic_distances(mesh: &TriangleMesh, source: usize) -> Result<Vec<f64>, CorrespondError> {
    EdgeGraph::new(mesh).distances_from(source)
}

/// Per-vertex normalised geodesic errors of an assignment.
#[derive(Debug, Clone)]
pub struct GeodesicErrors {
    errors: Vec<f64>,
}

impl GeodesicErrors {
    pub fn new(errors: Vec<f64>) -> Self {
        Self { errors }
    }

    pub fn errors(&self) -> &[f64] {
        &self.errors
    }

    /// Percentage of vertices with error at most `threshold`.
    pub fn fraction_at(&self, threshold: f64) -> f64 {
        if self.errors.is_empty() {
            return 0.0;
        }
        let hits = self.errors.iter().filter(|&&e| e <= threshold).count();
        100.0 * hits as f64 / self.errors.len() as f64
    }

    pub fn curve(&self, thresholds: &[f64]) -> Vec<(f64, f64)> {
        thresholds.iter().map(|&t| (t, self.fraction_at(t))).collect()
    }

    /// `k / 100` for `k = 0..=100`.
    pub fn default_thresholds() -> Vec<f64> {
        (0..=100).map(|k| k as f64 / 100.0).collect()
    }
}
