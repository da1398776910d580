//! Descriptor comparison, point-to-point and soft correspondences, and evaluation metrics.

mod geodesic;
mod softmap;

use std::io::{self, Write};
use std::path::Path;

use rayon::prelude::*;

pub use geodesic::{geodesic_distances, EdgeGraph, GeodesicErrors};
pub use softmap::{apply_soft_map, soft_map, sparsify_sweep, Bandwidth, SoftHitCriterion, SoftMap, Sweep};

use crate::descriptor::{DescriptorError, DescriptorField};
use crate::mesh::TriangleMesh;

#[derive(Debug, thiserror::Error)]
pub enum CorrespondError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Incompatible(#[from] DescriptorError),
    #[error("ground truth: {0}")]
    GroundTruth(String),
    #[error("vertex {vertex} out of range for {n} vertices")]
    Vertex { vertex: usize, n: usize },
    #[error("ground-truth file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

/// Discrete L1 distance `Σ_k |f_k - g_k|`.
pub fn descriptor_distance(f: &[f64], g: &[f64]) -> Result<f64, CorrespondError> {
    if f.len() != g.len() {
        return Err(CorrespondError::Dimension(format!("descriptor lengths {} and {}", f.len(), g.len())));
    }
    Ok(l1(f, g))
}

fn l1(f: &[f64], g: &[f64]) -> f64 {
    f.iter().zip(g).map(|(a, b)| (a - b).abs()).sum()
}

/// Partial L1 sum that gives up once it exceeds `bound`; the result is exact when `<= bound`.
fn l1_bounded(f: &[f64], g: &[f64], bound: f64) -> f64 {
    let mut s = 0.0;
    for (chunk_f, chunk_g) in f.chunks(16).zip(g.chunks(16)) {
        for (a, b) in chunk_f.iter().zip(chunk_g) {
            s += (a - b).abs();
        }
        if s > bound {
            return s;
        }
    }
    s
}

/// Matched target and feature distance for every reference vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    targets: Vec<usize>,
    distances: Vec<f64>,
}

impl Assignment {
    pub fn new(targets: Vec<usize>, distances: Vec<f64>) -> Result<Self, CorrespondError> {
        if targets.len() != distances.len() {
            return Err(CorrespondError::Dimension("targets and distances disagree in length".into()));
        }
        Ok(Self { targets, distances })
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// `ref_index,target_index` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "ref_index,target_index")?;
        for (i, j) in self.targets.iter().enumerate() {
            writeln!(w, "{i},{j}")?;
        }
        Ok(())
    }
}

/// Nearest target row in L1 for every reference row; ties go to the lowest index.
pub fn match_p2p(reference: &DescriptorField, target: &DescriptorField) -> Result<Assignment, CorrespondError> {
    reference.check_compatible(target)?;
    if target.nrows() == 0 {
        return Err(CorrespondError::Dimension("target field has no rows".into()));
    }
    let (targets, distances): (Vec<usize>, Vec<f64>) = (0..reference.nrows())
        .into_par_iter()
        .map(|i| {
            let f = reference.row(i);
            let mut best = (0, l1(f, target.row(0)));
            for k in 1..target.nrows() {
                let d = l1_bounded(f, target.row(k), best.1);
                if d < best.1 {
                    best = (k, d);
                }
            }
            best
        })
        .unzip();
    Assignment::new(targets, distances)
}

/// True target index for every reference vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    map: Vec<usize>,
    target_len: usize,
}

impl GroundTruth {
    pub fn identity(n: usize) -> Self {
        Self { map: (0..n).collect(), target_len: n }
    }

    pub fn new(map: Vec<usize>, target_len: usize) -> Result<Self, CorrespondError> {
        if let Some(&bad) = map.iter().find(|&&j| j >= target_len) {
            return Err(CorrespondError::Vertex { vertex: bad, n: target_len });
        }
        Ok(Self { map, target_len })
    }

    /// Parses either the keyword `identity` or `ref target` pairs (0-based), one per line.
    pub fn parse(text: &str, reference_len: usize, target_len: usize) -> Result<Self, CorrespondError> {
        let body: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty())
            .collect();
        if body.len() == 1 && body[0].1.eq_ignore_ascii_case("identity") {
            if reference_len > target_len {
                return Err(CorrespondError::GroundTruth(format!(
                    "identity map needs at least {reference_len} target vertices, have {target_len}"
                )));
            }
            return Ok(Self { map: (0..reference_len).collect(), target_len });
        }
        let mut map = vec![usize::MAX; reference_len];
        for (line, l) in body {
            let fields: Vec<&str> = l.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()).collect();
            let parse = |s: &str| {
                s.parse::<usize>().map_err(|_| CorrespondError::Format { line, message: format!("bad index {s:?}") })
            };
            if fields.len() != 2 {
                return Err(CorrespondError::Format { line, message: "expected two indices".into() });
            }
            let (i, j) = (parse(fields[0])?, parse(fields[1])?);
            if i >= reference_len {
                return Err(CorrespondError::Vertex { vertex: i, n: reference_len });
            }
            if j >= target_len {
                return Err(CorrespondError::Vertex { vertex: j, n: target_len });
            }
            if map[i] != usize::MAX {
                return Err(CorrespondError::Format { line, message: format!("reference vertex {i} listed twice") });
            }
            map[i] = j;
        }
        if let Some(i) = map.iter().position(|&j| j == usize::MAX) {
            return Err(CorrespondError::GroundTruth(format!("reference vertex {i} has no ground-truth entry")));
        }
        Ok(Self { map, target_len })
    }

    pub fn load(path: &Path, reference_len: usize, target_len: usize) -> Result<Self, CorrespondError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| CorrespondError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text, reference_len, target_len)
    }

    pub fn get(&self, i: usize) -> usize {
        self.map[i]
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn target_len(&self) -> usize {
        self.target_len
    }
}

/// Percentage of reference vertices matched to their true target.
pub fn hit_rate(a: &Assignment, gt: &GroundTruth) -> Result<f64, CorrespondError> {
    if a.len() != gt.len() {
        return Err(CorrespondError::Dimension(format!(
            "assignment covers {} vertices, ground truth {}",
            a.len(),
            gt.len()
        )));
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let hits = a.targets().iter().zip(gt.map()).filter(|(j, g)| j == g).count();
    Ok(100.0 * hits as f64 / a.len() as f64)
}

/// `ε_i = d(j(i), gt(i)) / sqrt(A_target)` over the target's edge graph.
pub fn geodesic_errors(
    a: &Assignment,
    gt: &GroundTruth,
    target_mesh: &TriangleMesh,
) -> Result<GeodesicErrors, CorrespondError> {
    if a.len() != gt.len() {
        return Err(CorrespondError::Dimension("assignment and ground truth disagree in length".into()));
    }
    let n = target_mesh.num_vertices();
    for &j in a.targets().iter().chain(gt.map()) {
        if j >= n {
            return Err(CorrespondError::Vertex { vertex: j, n });
        }
    }
    let graph = EdgeGraph::new(target_mesh);
    let scale = target_mesh.total_area().sqrt();
    let errors = (0..a.len())
        .into_par_iter()
        .map(|i| {
            let (j, g) = (a.targets()[i], gt.get(i));
            if j == g {
                Ok(0.0)
            } else {
                graph.distance(g, j).map(|d| d / scale)
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(GeodesicErrors::new(errors))
}

/// Geodesic-error curve across `thresholds`, as `(threshold, percent)` pairs.
pub fn geodesic_error_curve(
    a: &Assignment,
    gt: &GroundTruth,
    target_mesh: &TriangleMesh,
    thresholds: &[f64],
) -> Result<Vec<(f64, f64)>, CorrespondError> {
    Ok(geodesic_errors(a, gt, target_mesh)?.curve(thresholds))
}

/// `threshold,fraction` rows (fraction in percent).
pub fn write_curve_csv<W: Write>(mut w: W, curve: &[(f64, f64)]) -> io::Result<()> {
    writeln!(w, "threshold,fraction")?;
    for (t, f) in curve {
        writeln!(w, "{t},{f}")?;
    }
    Ok(())
}
