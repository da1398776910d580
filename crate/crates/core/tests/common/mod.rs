#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shapesig::correspond::{GroundTruth, SoftMap};
use shapesig::mesh::{shapes, LaplaceOperator, TriangleMesh};

/// Closed torus with every vertex displaced by up to `jitter` of the tube radius.
pub fn jittered_torus(nu: usize, nv: usize, jitter: f64, seed: u64) -> TriangleMesh {
    let base = shapes::torus(nu, nv, 2.0, 0.8);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vertices = base
        .vertices()
        .iter()
        .map(|p| {
            let mut q = *p;
            for c in &mut q {
                *c += jitter * 0.8 * rng.gen_range(-1.0..1.0) / nu.min(nv) as f64;
            }
            q
        })
        .collect();
    TriangleMesh::new(vertices, base.triangles().to_vec()).unwrap()
}

/// Icosphere with radii perturbed by up to `jitter`.
pub fn bumpy_sphere(level: u32, jitter: f64, seed: u64) -> TriangleMesh {
    let base = shapes::icosphere(level);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vertices = base
        .vertices()
        .iter()
        .map(|p| {
            let s = 1.0 + jitter * rng.gen_range(-1.0..1.0);
            [p[0] * s, p[1] * s, p[2] * s]
        })
        .collect();
    TriangleMesh::new(vertices, base.triangles().to_vec()).unwrap()
}

/// Planar grid with interior vertices nudged (open mesh with boundary).
pub fn jittered_grid(nx: usize, ny: usize, jitter: f64, seed: u64) -> TriangleMesh {
    let base = shapes::grid(nx, ny, 1.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1.0 / nx.max(ny) as f64;
    let vertices = base
        .vertices()
        .iter()
        .map(|p| {
            let interior = p[0] > 0.0 && p[0] < 1.0 && p[1] > 0.0 && p[1] < 1.0;
            if interior {
                [
                    p[0] + jitter * h * rng.gen_range(-1.0..1.0),
                    p[1] + jitter * h * rng.gen_range(-1.0..1.0),
                    0.3 * jitter * h * rng.gen_range(-1.0..1.0),
                ]
            } else {
                *p
            }
        })
        .collect();
    TriangleMesh::new(vertices, base.triangles().to_vec()).unwrap()
}

/// Dense spectrum of `L` in decreasing order (0 first) with `D`-orthonormal eigenvectors.
pub fn dense_spectrum(op: &LaplaceOperator) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(op.symmetric_normalized().to_dense());
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut vecs = DMatrix::zeros(op.dim(), op.dim());
    for (c, &i) in idx.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        for (x, a) in v.iter_mut().zip(op.areas()) {
            *x /= a.sqrt();
        }
        vecs.set_column(c, &v);
    }
    (idx.iter().map(|&i| eig.eigenvalues[i]).collect(), vecs)
}

/// Dense `A^{-1} b`.
pub fn dense_solve(a: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let x = a.clone().lu().solve(&nalgebra::DVector::from_column_slice(b)).expect("nonsingular");
    x.iter().copied().collect()
}

/// Every sparsification level by explicit removal.
pub fn brute_sweep(s: &SoftMap, gt: &GroundTruth) -> (Vec<(f64, f64)>, Option<f64>) {
    let mut order: Vec<usize> = (0..s.values().len()).filter(|&p| s.values()[p] != 0.0).collect();
    order.sort_by(|&a, &b| s.values()[a].total_cmp(&s.values()[b]).then(a.cmp(&b)));
    let mut v = s.values().to_vec();
    let total = v.len() as f64;
    let n = s.ncols();
    let mut points = Vec::new();
    let mut minimum = None;
    for t in 0..=order.len() {
        if t > 0 {
            v[order[t - 1]] = 0.0;
        }
        let hits = (0..n).filter(|&i| v[gt.get(i) * n + i] != 0.0).count();
        let rate = 100.0 * hits as f64 / n as f64;
        let density = 100.0 * (order.len() - t) as f64 / total;
        if hits == n {
            minimum = Some(density);
        }
        points.push((density, rate));
    }
    (points, minimum)
}

/// Random row-stochastic map with a spread of entry magnitudes.
pub fn random_stochastic(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> SoftMap {
    let mut v: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(0.0..1.0f64).powi(3)).collect();
    for r in v.chunks_mut(cols) {
        let s: f64 = r.iter().sum();
        r.iter_mut().for_each(|x| *x /= s);
    }
    SoftMap::from_dense(rows, cols, v).unwrap()
}
