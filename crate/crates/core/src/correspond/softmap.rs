use std::cmp::Ordering;
use std::io::{self, Write};

use rayon::prelude::*;

use super::{l1, CorrespondError, EdgeGraph, GroundTruth};
use crate::descriptor::DescriptorField;
use crate::mesh::TriangleMesh;

/// Kernel width used to turn distances into probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    /// Median of each target row's distances.
    RowMedian,
    Fixed(f64),
}

/// `Ñ x N` correspondence probabilities: row `j` is a target vertex, column `i` a reference vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftMap {
    nrows: usize,
    ncols: usize,
    values: Vec<f64>,
}

impl SoftMap {
    /// Row-major entries, each in `[0, 1]`.
    pub fn from_dense(nrows: usize, ncols: usize, values: Vec<f64>) -> Result<Self, CorrespondError> {
        if values.len() != nrows * ncols {
            return Err(CorrespondError::Dimension(format!("{} entries for a {nrows}x{ncols} map", values.len())));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(CorrespondError::Dimension("soft-map entries must lie in [0, 1]".into()));
        }
        Ok(Self { nrows, ncols, values })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn get(&self, j: usize, i: usize) -> f64 {
        self.values[j * self.ncols + i]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.ncols..(j + 1) * self.ncols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nnz(&self) -> usize {
        self.values.iter().filter(|&&v| v != 0.0).count()
    }

    /// Non-zero entries as a percentage of all `Ñ N` entries.
    pub fn density(&self) -> f64 {
        100.0 * self.nnz() as f64 / (self.nrows * self.ncols) as f64
    }

    /// Removes the smallest entries (ties by row-major position) until at most
    /// `density` percent remain.
    pub fn sparsified(&self, density: f64) -> Self {
        let keep = kept_entries(density, self.values.len()).min(self.nnz());
        let mut order: Vec<usize> = (0..self.values.len()).filter(|&p| self.values[p] != 0.0).collect();
        order.sort_unstable_by(|&a, &b| entry_cmp(&self.values, a, b));
        let mut values = self.values.clone();
        for &p in &order[..order.len() - keep] {
            values[p] = 0.0;
        }
        Self { nrows: self.nrows, ncols: self.ncols, values }
    }

    /// Rescales each non-empty row to sum to one.
    pub fn renormalized(&self) -> Self {
        let mut values = self.values.clone();
        for row in values.chunks_mut(self.ncols) {
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                row.iter_mut().for_each(|v| *v /= s);
            }
        }
        Self { nrows: self.nrows, ncols: self.ncols, values }
    }

    /// Header line `nrows ncols density`, then one `row col value` line per non-zero.
    pub fn write_triplets<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.density())?;
        for (p, v) in self.values.iter().enumerate() {
            if *v != 0.0 {
                writeln!(w, "{} {} {v:e}", p / self.ncols, p % self.ncols)?;
            }
        }
        Ok(())
    }
}

fn kept_entries(density: f64, total: usize) -> usize {
    ((density.clamp(0.0, 100.0) / 100.0) * total as f64).floor() as usize
}

fn entry_cmp(values: &[f64], a: usize, b: usize) -> Ordering {
    values[a].total_cmp(&values[b]).then(a.cmp(&b))
}

fn median(v: &mut [f64]) -> f64 {
    let n = v.len();
    let mid = n / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *m;
    if n % 2 == 1 {
        upper
    } else {
        let lower = v[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// `S_ji ∝ exp(-d(x_i, x̃_j) / s_j)`, each row normalised to sum to one.
///
/// A row whose bandwidth is zero (all distances equal to the median of zero)
/// becomes uniform.
pub fn soft_map(
    reference: &DescriptorField,
    target: &DescriptorField,
    bandwidth: Bandwidth,
) -> Result<SoftMap, CorrespondError> {
    reference.check_compatible(target)?;
    if let Bandwidth::Fixed(s) = bandwidth {
        if !(s > 0.0 && s.is_finite()) {
            return Err(CorrespondError::Dimension(format!("bandwidth {s} must be positive")));
        }
    }
    let n = reference.nrows();
    if n == 0 || target.nrows() == 0 {
        return Err(CorrespondError::Dimension("empty descriptor field".into()));
    }
    let rows: Vec<Vec<f64>> = (0..target.nrows())
        .into_par_iter()
        .map(|j| {
            let g = target.row(j);
            let d: Vec<f64> = (0..n).map(|i| l1(reference.row(i), g)).collect();
            let s = match bandwidth {
                Bandwidth::Fixed(s) => s,
                Bandwidth::RowMedian => median(&mut d.clone()),
            };
            if !(s > 0.0) {
                return vec![1.0 / n as f64; n];
            }
            // shifting by the row minimum leaves the normalised row unchanged
            let dmin = d.iter().copied().fold(f64::INFINITY, f64::min);
            let mut row: Vec<f64> = d.iter().map(|x| (-(x - dmin) / s).exp()).collect();
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= total);
            row
        })
        .collect();
    Ok(SoftMap { nrows: target.nrows(), ncols: n, values: rows.concat() })
}

/// `h̃ = S h`.
pub fn apply_soft_map(s: &SoftMap, h: &[f64]) -> Result<Vec<f64>, CorrespondError> {
    if h.len() != s.ncols {
        return Err(CorrespondError::Dimension(format!("indicator of length {} for {} columns", h.len(), s.ncols)));
    }
    Ok((0..s.nrows).map(|j| s.row(j).iter().zip(h).map(|(a, b)| a * b).sum()).collect())
}

/// When a reference vertex counts as softly matched.
#[derive(Debug, Clone, Copy)]
pub enum SoftHitCriterion<'a> {
    /// Its exact ground-truth entry `S_{gt(i), i}` survives.
    ExactEntry,
    /// Some surviving entry of its column lies within `radius` (normalised by
    /// `sqrt(area)`) of the ground-truth target on `target_mesh`.
    GeodesicBall { target_mesh: &'a TriangleMesh, radius: f64 },
}

/// Soft hit rate along the ascending-removal sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    /// `(density %, soft hit rate %)`, ordered by decreasing density.
    pub points: Vec<(f64, f64)>,
    /// Sparsest density at which every reference vertex still hits; `None`
    /// if some vertex misses before anything is removed.
    pub minimum_density: Option<f64>,
}

impl Sweep {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "density,soft_hit_rate")?;
        for (d, h) in &self.points {
            writeln!(w, "{d},{h}")?;
        }
        Ok(())
    }
}

/// Sorted, deduplicated `(value, position)` keys; rank of each = number of
/// non-zero entries ordered before it.
fn ranks_of(values: &[f64], mut keys: Vec<usize>) -> Vec<(usize, usize)> {
    keys.sort_unstable_by(|&a, &b| entry_cmp(values, a, b));
    keys.dedup();
    let mut counts = vec![0usize; keys.len() + 1];
    let before = |p: usize| keys.partition_point(|&k| entry_cmp(values, k, p) != Ordering::Greater);
    for (p, &v) in values.iter().enumerate() {
        if v != 0.0 {
            counts[before(p)] += 1;
        }
    }
    let mut out = Vec::with_capacity(keys.len());
    let mut acc = 0;
    for (m, &k) in keys.iter().enumerate() {
        acc += counts[m];
        out.push((k, acc));
    }
    out
}

/// Removes entries in ascending order and tracks the soft hit rate.
///
/// `levels` are the densities (percent) to sample; the exact transition to
/// below 100% is added to the curve.
pub fn sparsify_sweep(
    s: &SoftMap,
    gt: &GroundTruth,
    levels: &[f64],
    criterion: SoftHitCriterion<'_>,
) -> Result<Sweep, CorrespondError> {
    if gt.len() != s.ncols {
        return Err(CorrespondError::Dimension(format!(
            "ground truth covers {} reference vertices, map has {} columns",
            gt.len(),
            s.ncols
        )));
    }
    if let Some(&bad) = gt.map().iter().find(|&&j| j >= s.nrows) {
        return Err(CorrespondError::Vertex { vertex: bad, n: s.nrows });
    }
    let n = s.ncols;
    let total = s.values.len();
    let nnz = s.nnz();

    // per reference vertex: the candidate entries whose survival counts as a hit
    let candidates: Vec<Vec<usize>> = match criterion {
        SoftHitCriterion::ExactEntry => (0..n).map(|i| vec![gt.get(i) * n + i]).collect(),
        SoftHitCriterion::GeodesicBall { target_mesh, radius } => {
            if target_mesh.num_vertices() != s.nrows {
                return Err(CorrespondError::Dimension("target mesh does not match the map's rows".into()));
            }
            let graph = EdgeGraph::new(target_mesh);
            let r = radius * target_mesh.total_area().sqrt();
            (0..n)
                .into_par_iter()
                .map(|i| graph.ball(gt.get(i), r).map(|b| b.into_iter().map(|j| j * n + i).collect()))
                .collect::<Result<_, _>>()?
        }
    };
    let flat: Vec<usize> = candidates.iter().flatten().copied().filter(|&p| s.values[p] != 0.0).collect();
    let ranks = ranks_of(&s.values, flat);
    let rank = |p: usize| ranks.binary_search_by(|(k, _)| entry_cmp(&s.values, *k, p)).ok().map(|m| ranks[m].1);

    // a vertex survives t removals while the last of its candidates to go has rank >= t
    let mut survival: Vec<Option<usize>> = candidates
        .iter()
        .map(|c| c.iter().filter(|&&p| s.values[p] != 0.0).filter_map(|&p| rank(p)).max())
        .collect();
    survival.sort_unstable();
    let alive = |t: usize| survival.len() - survival.partition_point(|r| r.is_none_or(|r| r < t));
    let pct = |count: usize| 100.0 * count as f64 / n as f64;
    let density = |t: usize| 100.0 * (nnz - t) as f64 / total as f64;

    // largest removal count that keeps every vertex, by bisection
    let all_alive = |t: usize| alive(t) == n;
    let minimum_density = if n > 0 && all_alive(0) {
        let (mut lo, mut hi) = (0usize, nnz);
        while lo < hi {
            let mid = lo + (hi - lo).div_ceil(2);
            if all_alive(mid) {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        Some(lo)
    } else {
        None
    };

    let mut ts: Vec<usize> = levels.iter().map(|&d| nnz - kept_entries(d, total).min(nnz)).collect();
    if let Some(t) = minimum_density {
        ts.push(t);
        if t < nnz {
            ts.push(t + 1);
        }
    }
    ts.sort_unstable();
    ts.dedup();
    let points = ts.into_iter().map(|t| (density(t), pct(alive(t)))).collect();
    Ok(Sweep { points, minimum_density: minimum_density.map(density) })
}
