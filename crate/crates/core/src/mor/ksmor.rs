use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::MorError;
use crate::descriptor::{DescriptorField, Method, Pde, Sampling, TimeGrid};
use crate::mesh::LaplaceOperator;
use crate::solvers::{factorize, Factorization};

const BREAKDOWN_TOL: f64 = 1e-12;
const REORTH_TOL: f64 = 1e-8;

/// Solves `(L - σI) x = b` through `x = -(σD - W)^{-1} D b`.
///
/// `σD - W` is symmetric (positive definite for `σ > 0`), so one sparse
/// factorization serves every vertex of a shape.
pub struct ShiftedSystem {
    sigma: f64,
    factor: Factorization,
    areas: Vec<f64>,
}

impl ShiftedSystem {
    pub fn new(op: &LaplaceOperator, sigma: f64) -> Result<Self, MorError> {
        if sigma == 0.0 || !sigma.is_finite() {
            return Err(MorError::InvalidArgument(format!(
                "expansion point σ = {sigma} is not allowed; zero is an eigenvalue of L"
            )));
        }
        let shifted: Vec<f64> = op.areas().iter().map(|a| sigma * a).collect();
        let matrix = op.weights().scale_add_diagonal(-1.0, &shifted);
        let factor = factorize(&matrix).map_err(MorError::Solver)?;
        Ok(Self { sigma, factor, areas: op.areas().to_vec() })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn dim(&self) -> usize {
        self.areas.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x: Vec<f64> = b.iter().zip(&self.areas).map(|(v, a)| -v * a).collect();
        let mut work = vec![0.0; x.len()];
        self.factor.solve_in_place(&mut x, &mut work);
        x
    }
}

/// Inner product the Krylov basis is orthonormalised in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KrylovInner {
    /// `V^T D V = I`; the projected operator `V^T W V` is symmetric negative
    /// semi-definite, so the reduced model is stable for any mesh.
    #[default]
    Mass,
    /// `V^T V = I` with `L_q = V^T L V`; `L` is not symmetric in this inner
    /// product, and on irregular meshes `L_q` can pick up slightly positive eigenvalues.
    Euclidean,
}

/// Orthonormal Krylov basis for one source vertex and its Galerkin projection.
#[derive(Debug, Clone)]
pub struct KrylovBasis {
    v: DMatrix<f64>,
    inner: KrylovInner,
    lq: DMatrix<f64>,
    u0: DVector<f64>,
    sigma: f64,
    vertex: usize,
    breakdown: bool,
}

impl KrylovBasis {
    /// `N x q`, orthonormal columns in [`KrylovBasis::inner`].
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn inner(&self) -> KrylovInner {
        self.inner
    }

    /// Reduced operator: `V^T W V` (mass inner product) or `V^T L V` (Euclidean).
    pub fn projected_operator(&self) -> &DMatrix<f64> {
        &self.lq
    }

    pub fn reduced_initial_state(&self) -> &DVector<f64> {
        &self.u0
    }

    pub fn dim(&self) -> usize {
        self.v.ncols()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn vertex(&self) -> usize {
        self.vertex
    }

    /// True when the Krylov space became invariant before reaching the requested size.
    pub fn breakdown(&self) -> bool {
        self.breakdown
    }

    /// Moments `e_out^T V (L_q - σI)^{-(k+1)} u_{r,0}` of the projected model.
    pub fn reduced_moments(&self, out_vertex: usize, k: usize) -> Result<Vec<f64>, MorError> {
        if k == 0 {
            return Err(MorError::InvalidArgument("at least one moment is required".into()));
        }
        if out_vertex >= self.v.nrows() {
            return Err(MorError::Vertex { vertex: out_vertex, n: self.v.nrows() });
        }
        let q = self.dim();
        let lu = (&self.lq - DMatrix::<f64>::identity(q, q) * self.sigma).lu();
        let row = self.v.row(out_vertex);
        let mut x = self.u0.clone();
        let mut out = Vec::with_capacity(k);
        for _ in 0..k {
            x = lu.solve(&x).ok_or(MorError::SingularReducedSystem)?;
            out.push((row * &x)[0]);
        }
        Ok(out)
    }

    /// Implicit Euler on the `q x q` system; returns the output at the source vertex for `k = 1..=M`.
    pub fn integrate(&self, grid: &TimeGrid, pde: Pde) -> Result<Vec<f64>, MorError> {
        let q = self.dim();
        let tau = grid.step();
        let c = match pde {
            Pde::Heat => tau,
            Pde::Wave => tau * tau,
        };
        let lu = (DMatrix::<f64>::identity(q, q) - &self.lq * c).lu();
        let row = self.v.row(self.vertex);
        let mut out = Vec::with_capacity(grid.levels());
        let mut prev = self.u0.clone();
        let mut prev2 = prev.clone();
        for k in 1..=grid.levels() {
            let rhs = match pde {
                Pde::Wave if k > 1 => &prev * 2.0 - &prev2,
                _ => prev.clone(),
            };
            let next = lu.solve(&rhs).ok_or(MorError::SingularReducedSystem)?;
            out.push((row * &next)[0]);
            prev2 = std::mem::replace(&mut prev, next);
        }
        Ok(out)
    }
}

fn delta(op: &LaplaceOperator, vertex: usize) -> Vec<f64> {
    let mut u = vec![0.0; op.dim()];
    u[vertex] = 1.0 / op.areas()[vertex];
    u
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Arnoldi basis in the default (mass) inner product.
pub fn ksmor_basis(
    op: &LaplaceOperator,
    shifted: &ShiftedSystem,
    vertex: usize,
    q: usize,
) -> Result<KrylovBasis, MorError> {
    ksmor_basis_with(op, shifted, vertex, q, KrylovInner::default())
}

/// Arnoldi on `(L - σI)^{-1}` from `(L - σI)^{-1} u_{i,0}`, modified Gram-Schmidt
/// with a second pass when orthogonality is visibly lost.
pub fn ksmor_basis_with(
    op: &LaplaceOperator,
    shifted: &ShiftedSystem,
    vertex: usize,
    q: usize,
    inner: KrylovInner,
) -> Result<KrylovBasis, MorError> {
    let n = op.dim();
    if vertex >= n {
        return Err(MorError::Vertex { vertex, n });
    }
    if q == 0 || q > n {
        return Err(MorError::InvalidArgument(format!("Krylov dimension {q} outside 1..={n}")));
    }
    if shifted.dim() != n {
        return Err(MorError::InvalidArgument("shifted system belongs to another operator".into()));
    }
    let u0 = delta(op, vertex);
    let mass = op.areas();
    let ip = |a: &[f64], b: &[f64]| match inner {
        KrylovInner::Mass => a.iter().zip(b).zip(mass).map(|((x, y), m)| m * x * y).sum(),
        KrylovInner::Euclidean => dot(a, b),
    };
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(q);
    let mut next = shifted.solve(&u0);
    let mut breakdown = false;
    while cols.len() < q {
        let before = ip(&next, &next).sqrt();
        for c in &cols {
            let h = ip(c, &next);
            next.iter_mut().zip(c).for_each(|(x, v)| *x -= h * v);
        }
        let mut norm = ip(&next, &next).sqrt();
        let loss = cols.iter().map(|c| ip(c, &next).abs()).fold(0.0, f64::max) / norm.max(f64::MIN_POSITIVE);
        if loss > REORTH_TOL {
            for c in &cols {
                let h = ip(c, &next);
                next.iter_mut().zip(c).for_each(|(x, v)| *x -= h * v);
            }
            norm = ip(&next, &next).sqrt();
        }
        if !(norm > BREAKDOWN_TOL * before) {
            breakdown = true;
            break;
        }
        next.iter_mut().for_each(|x| *x /= norm);
        let following = if cols.len() + 1 < q { shifted.solve(&next) } else { Vec::new() };
        cols.push(std::mem::replace(&mut next, following));
    }
    let q = cols.len();
    let v = DMatrix::from_fn(n, q, |i, j| cols[j][i]);
    let mut image = DMatrix::<f64>::zeros(n, q);
    for (j, c) in cols.iter().enumerate() {
        let col = match inner {
            KrylovInner::Mass => op.weights().mul_vec(c),
            KrylovInner::Euclidean => op.apply(c),
        };
        image.set_column(j, &DVector::from_vec(col));
    }
    let lq = v.transpose() * image;
    // test space D V (mass) or V (Euclidean)
    let u0r = match inner {
        KrylovInner::Mass => v.row(vertex).transpose(),
        KrylovInner::Euclidean => v.tr_mul(&DVector::from_vec(u0)),
    };
    Ok(KrylovBasis { v, inner, lq, u0: u0r, sigma: shifted.sigma(), vertex, breakdown })
}

/// Reduced descriptor row for one vertex.
pub fn ksmor_descriptor(
    op: &LaplaceOperator,
    shifted: &ShiftedSystem,
    vertex: usize,
    q: usize,
    grid: &TimeGrid,
    pde: Pde,
) -> Result<Vec<f64>, MorError> {
    ksmor_basis(op, shifted, vertex, q)?.integrate(grid, pde)
}

/// Reduced descriptors for every vertex, sharing one shifted factorization.
pub fn ksmor_descriptors(
    op: &LaplaceOperator,
    sigma: f64,
    q: usize,
    grid: &TimeGrid,
    pde: Pde,
) -> Result<DescriptorField, MorError> {
    ksmor_descriptors_with(op, sigma, q, grid, pde, KrylovInner::default())
}

pub fn ksmor_descriptors_with(
    op: &LaplaceOperator,
    sigma: f64,
    q: usize,
    grid: &TimeGrid,
    pde: Pde,
    inner: KrylovInner,
) -> Result<DescriptorField, MorError> {
    let shifted = ShiftedSystem::new(op, sigma)?;
    let rows: Vec<Vec<f64>> = (0..op.dim())
        .into_par_iter()
        .map(|i| ksmor_basis_with(op, &shifted, i, q, inner)?.integrate(grid, pde))
        .collect::<Result<_, _>>()?;
    Ok(DescriptorField::new(op.dim(), rows.concat(), Some(pde), Method::Ksmor, Sampling::Time(*grid))?)
}

/// Full-order moments `m_k = e_out^T (L - σI)^{-(k+1)} u_{in,0}`, `k = 0..count`.
pub fn moments(
    op: &LaplaceOperator,
    out_vertex: usize,
    in_vertex: usize,
    sigma: f64,
    count: usize,
) -> Result<Vec<f64>, MorError> {
    let n = op.dim();
    for v in [out_vertex, in_vertex] {
        if v >= n {
            return Err(MorError::Vertex { vertex: v, n });
        }
    }
    if count == 0 {
        return Err(MorError::InvalidArgument("at least one moment is required".into()));
    }
    let shifted = ShiftedSystem::new(op, sigma)?;
    let mut x = delta(op, in_vertex);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        x = shifted.solve(&x);
        out.push(x[out_vertex]);
    }
    Ok(out)
}
