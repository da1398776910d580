//! Extremal eigenpairs of the pencil `W v = λ D v` for a negative
//! semi-definite `W` and positive diagonal `D`.
//!
//! Smallest-magnitude eigenvalues come from shift-invert Lanczos with full
//! reorthogonalisation and locking: the Krylov space of `(σD - A)^{-1} M`
//! selects the subspace, a Rayleigh-Ritz step on the unshifted pencil gives
//! the values, and converged pairs are deflated before the next restart so
//! that degenerate eigenspaces are recovered copy by copy.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{factorize, CsrMatrix, SolverError};

/// Which eigenproblem is handed to the Lanczos iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EigenMode {
    /// Standard problem for `B = D^{-1/2} W D^{-1/2}`, back-transformed by `D^{-1/2}`.
    Symmetric,
    /// `W v = λ D v` with a `D`-inner-product Lanczos.
    Generalised,
}

impl EigenMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            EigenMode::Symmetric => "symmetric",
            EigenMode::Generalised => "generalised",
        }
    }
}

/// Inner product the returned vectors are orthonormal in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orthogonality {
    DInner,
    Euclidean,
}

/// Eigenvalues ordered by increasing magnitude and their eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    values: Vec<f64>,
    vectors: DMatrix<f64>,
    metric: Orthogonality,
}

impl EigenPairs {
    pub fn new(values: Vec<f64>, vectors: DMatrix<f64>, metric: Orthogonality) -> Result<Self, SolverError> {
        if values.len() != vectors.ncols() {
            return Err(SolverError::Dimension(format!(
                "{} eigenvalues for {} eigenvectors",
                values.len(),
                vectors.ncols()
            )));
        }
        Ok(Self { values, vectors, metric })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `N x r`, one eigenvector per column.
    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn metric(&self) -> Orthogonality {
        self.metric
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    /// First `r` pairs.
    pub fn truncated(&self, r: usize) -> Self {
        let r = r.min(self.len());
        Self {
            values: self.values[..r].to_vec(),
            vectors: self.vectors.columns(0, r).into_owned(),
            metric: self.metric,
        }
    }

    /// `||W v_i - λ_i D v_i||_2` for each pair.
    pub fn residuals(&self, w: &CsrMatrix, d: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let v: Vec<f64> = self.vectors.column(i).iter().copied().collect();
                let wv = w.mul_vec(&v);
                wv.iter()
                    .zip(&v)
                    .zip(d)
                    .map(|((a, b), m)| (a - self.values[i] * m * b).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }
}

const DEFAULT_SEED: u64 = 0x5eed_1a9c;

/// Symmetric pencil `A x = λ M x` with diagonal `M`.
struct Pencil<'a> {
    a: &'a CsrMatrix,
    mass: Vec<f64>,
    a_norm: f64,
}

#[derive(Clone, Copy, PartialEq)]
enum Wanted {
    NearZero,
    MostNegative,
}

struct RunResult {
    pairs: Vec<(f64, DVector<f64>)>,
}

impl Pencil<'_> {
    fn dim(&self) -> usize {
        self.mass.len()
    }

    fn m_mul(&self, x: &DVector<f64>) -> DVector<f64> {
        x.component_mul(&DVector::from_column_slice(&self.mass))
    }

    fn m_norm(&self, x: &DVector<f64>) -> f64 {
        x.iter().zip(&self.mass).map(|(v, m)| m * v * v).sum::<f64>().sqrt()
    }

    fn a_mul(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(self.a.mul_vec(x.as_slice()))
    }

    /// Two passes of classical Gram-Schmidt in the `M` inner product.
    fn orthogonalize(&self, z: &mut DVector<f64>, basis: nalgebra::DMatrixView<f64>) {
        if basis.ncols() == 0 {
            return;
        }
        for _ in 0..2 {
            let h = basis.tr_mul(&self.m_mul(z));
            *z -= basis * h;
        }
    }

    /// One Lanczos sweep from `start`, deflated against `locked`.
    #[allow(clippy::too_many_arguments)]
    fn run(
        &self,
        op: &dyn Fn(&DVector<f64>) -> DVector<f64>,
        start: DVector<f64>,
        locked: &DMatrix<f64>,
        want: usize,
        cap: usize,
        tol: f64,
        order: Wanted,
    ) -> RunResult {
        let n = self.dim();
        let mut q = DMatrix::<f64>::zeros(n, cap);
        let mut aq = DMatrix::<f64>::zeros(n, cap);
        let mut h = DMatrix::<f64>::zeros(cap, cap);

        let mut z = start;
        self.orthogonalize(&mut z, locked.columns(0, locked.ncols()));
        let nz = self.m_norm(&z);
        if !(nz > 0.0) {
            return RunResult { pairs: Vec::new() };
        }
        z /= nz;

        let mut dims = 0;
        let mut last_check = 0;
        loop {
            // append z as basis vector `dims`
            q.set_column(dims, &z);
            let az = self.a_mul(&z);
            aq.set_column(dims, &az);
            let col = q.columns(0, dims + 1).tr_mul(&az);
            for i in 0..=dims {
                h[(i, dims)] = col[i];
                h[(dims, i)] = col[i];
            }
            dims += 1;

            let mut next = op(&q.column(dims - 1).into_owned());
            let before = self.m_norm(&next);
            self.orthogonalize(&mut next, locked.columns(0, locked.ncols()));
            self.orthogonalize(&mut next, q.columns(0, dims));
            let beta = self.m_norm(&next);
            let breakdown = !(beta > 1e-10 * before);

            let step = (dims / 10).max(4);
            let due = dims >= want + 2 && dims - last_check >= step;
            let full = dims == cap;
            if due || full || breakdown || dims == n - locked.ncols() {
                last_check = dims;
                let pairs = self.rayleigh_ritz(&q, &aq, &h, dims, want, tol, order);
                if pairs.len() >= want || full || breakdown || dims == n - locked.ncols() {
                    return RunResult { pairs };
                }
            }
            z = next / beta;
        }
    }

    /// Ritz pairs of the first `dims` basis vectors; returns the converged prefix.
    #[allow(clippy::too_many_arguments)]
    fn rayleigh_ritz(
        &self,
        q: &DMatrix<f64>,
        aq: &DMatrix<f64>,
        h: &DMatrix<f64>,
        dims: usize,
        want: usize,
        tol: f64,
        order: Wanted,
    ) -> Vec<(f64, DVector<f64>)> {
        let eig = SymmetricEigen::new(h.view((0, 0), (dims, dims)).into_owned());
        let mut idx: Vec<usize> = (0..dims).collect();
        match order {
            Wanted::NearZero => idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a])),
            Wanted::MostNegative => idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b])),
        }
        // evaluate a few beyond `want` so a run can lock more than asked for
        let take = (want + 8).min(dims);
        let mut s = DMatrix::<f64>::zeros(dims, take);
        for (c, &i) in idx[..take].iter().enumerate() {
            s.set_column(c, &eig.eigenvectors.column(i));
        }
        let y = q.columns(0, dims) * &s;
        let ay = aq.columns(0, dims) * &s;
        let mut out = Vec::new();
        for (c, &i) in idx[..take].iter().enumerate() {
            let mu = eig.eigenvalues[i];
            let yc = y.column(c).into_owned();
            let r = ay.column(c) - self.m_mul(&yc) * mu;
            if r.norm() <= tol * self.a_norm * yc.norm() {
                out.push((mu, yc));
            } else {
                break;
            }
        }
        out
    }
}

fn random_start(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
}

fn columns_matrix(n: usize, cols: &[DVector<f64>]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, cols.len());
    for (j, c) in cols.iter().enumerate() {
        m.set_column(j, c);
    }
    m
}

fn validate(w: &CsrMatrix, d: &[f64]) -> Result<(), SolverError> {
    if !w.is_square() || w.nrows() != d.len() {
        return Err(SolverError::Dimension("W and D disagree in size".into()));
    }
    if !w.is_symmetric() && !w.is_symmetric_exact() {
        return Err(SolverError::NotSymmetric);
    }
    if d.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(SolverError::InvalidArgument("D must be positive".into()));
    }
    Ok(())
}

fn build_pencil<'a>(
    w: &'a CsrMatrix,
    b_storage: &'a Option<CsrMatrix>,
    d: &[f64],
    mode: EigenMode,
) -> Pencil<'a> {
    match mode {
        EigenMode::Symmetric => {
            let b = b_storage.as_ref().expect("symmetric mode needs B");
            Pencil { a: b, mass: vec![1.0; d.len()], a_norm: b.norm_inf() }
        }
        EigenMode::Generalised => Pencil { a: w, mass: d.to_vec(), a_norm: w.norm_inf() },
    }
}

fn normalized_b(w: &CsrMatrix, d: &[f64]) -> CsrMatrix {
    let s: Vec<f64> = d.iter().map(|a| 1.0 / a.sqrt()).collect();
    w.scaled(&s, &s)
}

/// The `r` eigenvalues of `L = D^{-1} W` closest to zero, with `D`-orthonormal eigenvectors.
///
/// Eigenvalues are returned ordered `|λ_1| <= |λ_2| <= ...`; each eigenvector
/// is sign-normalised so that its largest-magnitude entry is positive.
pub fn eig_smallest(
    w: &CsrMatrix,
    d: &[f64],
    r: usize,
    mode: EigenMode,
    tol: f64,
) -> Result<EigenPairs, SolverError> {
    validate(w, d)?;
    let n = d.len();
    if r == 0 || r > n {
        return Err(SolverError::InvalidArgument(format!("requested {r} eigenpairs of a {n}x{n} problem")));
    }
    let b_storage = (mode == EigenMode::Symmetric).then(|| normalized_b(w, d));
    let pencil = build_pencil(w, &b_storage, d, mode);

    // σ_e M - A is positive definite because A is negative semi-definite
    let shift = 1e-8 * pencil.a_norm.max(f64::MIN_POSITIVE);
    let shifted = pencil.a.scale_add_diagonal(-1.0, &pencil.mass.iter().map(|m| shift * m).collect::<Vec<_>>());
    let factor = factorize(&shifted)?;
    let op = |x: &DVector<f64>| -> DVector<f64> {
        let mut y = pencil.m_mul(x);
        let mut work = vec![0.0; n];
        factor.solve_in_place(y.as_mut_slice(), &mut work);
        y
    };

    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let mut locked_vals: Vec<f64> = Vec::new();
    let mut locked_vecs: Vec<DVector<f64>> = Vec::new();
    let mut failures = 0;
    let mut runs = 0;
    loop {
        let capacity = n - locked_vecs.len();
        if capacity == 0 {
            break;
        }
        let verifying = locked_vecs.len() >= r;
        let want = if verifying { 1 } else { (r - locked_vecs.len()).min(capacity) };
        let cap = capacity.min((3 * want + 60).max(120));
        let locked = columns_matrix(n, &locked_vecs);
        let res = pencil.run(&op, random_start(n, &mut rng), &locked, want, cap, tol, Wanted::NearZero);
        runs += 1;
        if verifying {
            let mut sorted = locked_vals.clone();
            sorted.sort_by(|a, b| b.total_cmp(a));
            let threshold = sorted[r - 1] + tol * pencil.a_norm;
            match res.pairs.first() {
                Some((mu, _)) if *mu > threshold => {}
                _ => break,
            }
        }
        if res.pairs.is_empty() {
            failures += 1;
            if failures >= 4 {
                return Err(SolverError::EigenNoConvergence { converged: locked_vecs.len().min(r), wanted: r });
            }
            continue;
        }
        failures = 0;
        for (mu, y) in res.pairs {
            locked_vals.push(mu);
            locked_vecs.push(y);
        }
        if runs > 64 + 4 * r {
            return Err(SolverError::EigenNoConvergence { converged: locked_vecs.len().min(r), wanted: r });
        }
    }

    let mut order: Vec<usize> = (0..locked_vals.len()).collect();
    // stable: equal values keep convergence order
    order.sort_by(|&a, &b| locked_vals[b].total_cmp(&locked_vals[a]));
    order.truncate(r);

    let mut values = Vec::with_capacity(r);
    let mut vectors = DMatrix::<f64>::zeros(n, r);
    for (c, &k) in order.iter().enumerate() {
        // W is negative semi-definite; positive values are round-off
        values.push(locked_vals[k].min(0.0));
        let mut v = locked_vecs[k].clone();
        if mode == EigenMode::Symmetric {
            for (x, a) in v.iter_mut().zip(d) {
                *x /= a.sqrt();
            }
        }
        let pivot = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        if pivot < 0.0 {
            v.neg_mut();
        }
        vectors.set_column(c, &v);
    }
    EigenPairs::new(values, vectors, Orthogonality::DInner)
}

/// The largest-magnitude (most negative) eigenvalue of `L = D^{-1} W`.
pub fn eig_largest_magnitude(w: &CsrMatrix, d: &[f64], mode: EigenMode, tol: f64) -> Result<f64, SolverError> {
    validate(w, d)?;
    let n = d.len();
    let b_storage = (mode == EigenMode::Symmetric).then(|| normalized_b(w, d));
    let pencil = build_pencil(w, &b_storage, d, mode);
    let op = |x: &DVector<f64>| -> DVector<f64> {
        let mut y = pencil.a_mul(x);
        for (v, m) in y.iter_mut().zip(&pencil.mass) {
            *v /= m;
        }
        y
    };
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED ^ 0xff);
    let empty = DMatrix::<f64>::zeros(n, 0);
    let mut start = random_start(n, &mut rng);
    let cap = n.min(400);
    for _ in 0..8 {
        let res = pencil.run(&op, start.clone(), &empty, 1, cap, tol, Wanted::MostNegative);
        if let Some((mu, _)) = res.pairs.first() {
            return Ok(mu.min(0.0));
        }
        // explicit restart from a fresh vector blended with the previous start
        start = random_start(n, &mut rng) * 0.1 + start;
    }
    Err(SolverError::EigenNoConvergence { converged: 0, wanted: 1 })
}
