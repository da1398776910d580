use std::path::Path;

use nalgebra::DMatrix;

use super::MorError;
use crate::descriptor::{ByteReader, DescriptorField, Method, Pde, Sampling, TimeGrid};
use crate::mesh::LaplaceOperator;
use crate::solvers::{eig_largest_magnitude, eig_smallest, EigenMode, EigenPairs, Orthogonality};

const DEFAULT_TOL: f64 = 1e-10;
const MAGIC: &[u8; 4] = b"SSMR";
const VERSION: u32 = 1;

/// `r` retained modes of `L` plus its fastest eigenvalue `λ_N`.
#[derive(Debug, Clone)]
pub struct ReducedModelMcr {
    pairs: EigenPairs,
    lambda_n: f64,
    mode: EigenMode,
}

impl ReducedModelMcr {
    pub fn new(pairs: EigenPairs, lambda_n: f64, mode: EigenMode) -> Result<Self, MorError> {
        if pairs.is_empty() {
            return Err(MorError::InvalidArgument("a reduced model needs at least one mode".into()));
        }
        if !(lambda_n <= 0.0 && lambda_n.is_finite()) {
            return Err(MorError::InvalidArgument(format!("λ_N = {lambda_n} must be finite and non-positive")));
        }
        Ok(Self { pairs, lambda_n, mode })
    }

    pub fn pairs(&self) -> &EigenPairs {
        &self.pairs
    }

    pub fn modes(&self) -> usize {
        self.pairs.len()
    }

    pub fn lambda_n(&self) -> f64 {
        self.lambda_n
    }

    pub fn eig_mode(&self) -> EigenMode {
        self.mode
    }

    /// Retained eigenvalue of largest magnitude.
    pub fn lambda_r(&self) -> f64 {
        *self.pairs.values().last().expect("model has at least one mode")
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let v = self.pairs.vectors();
        let mut out = Vec::with_capacity(48 + 8 * (v.len() + self.modes()));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(match self.mode {
            EigenMode::Symmetric => 0,
            EigenMode::Generalised => 1,
        });
        out.extend_from_slice(&(v.nrows() as u64).to_le_bytes());
        out.extend_from_slice(&(v.ncols() as u64).to_le_bytes());
        out.extend_from_slice(&self.lambda_n.to_le_bytes());
        for x in self.pairs.values() {
            out.extend_from_slice(&x.to_le_bytes());
        }
        // nalgebra storage is column-major
        for x in v.as_slice() {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, MorError> {
        let mut r = ByteReader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(MorError::Format("bad magic".into()));
        }
        let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
        if version != VERSION {
            return Err(MorError::Format(format!("unsupported version {version}")));
        }
        let mode = match r.u8()? {
            0 => EigenMode::Symmetric,
            1 => EigenMode::Generalised,
            t => return Err(MorError::Format(format!("unknown eigen mode {t}"))),
        };
        let n = r.u64()? as usize;
        let modes = r.u64()? as usize;
        let lambda_n = r.f64()?;
        let values = r.f64s(modes)?;
        let count = n.checked_mul(modes).ok_or_else(|| MorError::Format("size overflow".into()))?;
        let vectors = DMatrix::from_vec(n, modes, r.f64s(count)?);
        if r.pos != bytes.len() {
            return Err(MorError::Format("trailing bytes".into()));
        }
        let pairs = EigenPairs::new(values, vectors, Orthogonality::DInner).map_err(MorError::Eigen)?;
        Self::new(pairs, lambda_n, mode)
    }

    pub fn write(&self, path: &Path) -> Result<(), MorError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, MorError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// Symmetric-mode eigensolve with the default tolerance.
pub fn mcr_reduce(op: &LaplaceOperator, r: usize) -> Result<ReducedModelMcr, MorError> {
    mcr_reduce_with(op, r, EigenMode::Symmetric, DEFAULT_TOL)
}

pub fn mcr_reduce_with(
    op: &LaplaceOperator,
    r: usize,
    mode: EigenMode,
    tol: f64,
) -> Result<ReducedModelMcr, MorError> {
    if r == 0 || r > op.dim() {
        return Err(MorError::InvalidArgument(format!("mode count {r} outside 1..={}", op.dim())));
    }
    let pairs = eig_smallest(op.weights(), op.areas(), r, mode, tol).map_err(MorError::Eigen)?;
    let lambda_n = if r == op.dim() {
        *pairs.values().last().unwrap()
    } else {
        eig_largest_magnitude(op.weights(), op.areas(), mode, tol).map_err(MorError::Eigen)?
    };
    // the extremal run and the partial run must agree on the ordering of the ends
    let lambda_n = lambda_n.min(*pairs.values().last().unwrap());
    ReducedModelMcr::new(pairs, lambda_n, mode)
}

/// Horizon that makes the slowest retained dynamics reach as far as the
/// fastest full-order mode: square root for heat, fourth root for wave.
pub fn adapted_time(lambda_r: f64, lambda_n: f64, t_max: f64, pde: Pde) -> Result<f64, MorError> {
    if lambda_r == 0.0 {
        return Err(MorError::ZeroEigenvalue);
    }
    if lambda_n == 0.0 || !lambda_n.is_finite() || !lambda_r.is_finite() {
        return Err(MorError::InvalidArgument(format!("λ_N = {lambda_n} must be finite and nonzero")));
    }
    if !(t_max > 0.0) {
        return Err(MorError::InvalidArgument(format!("t_max = {t_max} must be positive")));
    }
    let ratio = lambda_n.abs() / lambda_r.abs();
    let factor = match pde {
        Pde::Heat => ratio.sqrt(),
        Pde::Wave => ratio.sqrt().sqrt(),
    };
    Ok(t_max * factor)
}

/// Grid an MCR descriptor is actually sampled on.
fn effective_grid(
    model: &ReducedModelMcr,
    grid: &TimeGrid,
    pde: Pde,
    adapt: bool,
    reference: Option<&TimeGrid>,
) -> Result<TimeGrid, MorError> {
    if let Some(g) = reference {
        return Ok(*g);
    }
    if !adapt || model.lambda_r() == 0.0 {
        return Ok(*grid);
    }
    let t = adapted_time(model.lambda_r(), model.lambda_n(), grid.t_max(), pde)?;
    Ok(grid.with_t_max(t)?)
}

/// Per-mode scalar recurrence coefficients, `r x M`.
fn mode_coefficients(values: &[f64], grid: &TimeGrid, pde: Pde) -> Result<DMatrix<f64>, MorError> {
    let tau = grid.step();
    let m = grid.levels();
    let mut c = DMatrix::<f64>::zeros(values.len(), m);
    for (j, &lambda) in values.iter().enumerate() {
        let denom = match pde {
            Pde::Heat => 1.0 - tau * lambda,
            Pde::Wave => 1.0 - tau * tau * lambda,
        };
        if denom == 0.0 || !denom.is_finite() {
            return Err(MorError::SingularReducedSystem);
        }
        let p = 1.0 / denom;
        let (mut prev2, mut prev) = (1.0, 1.0);
        for k in 0..m {
            let next = match pde {
                Pde::Heat => p * prev,
                Pde::Wave if k == 0 => p * prev,
                Pde::Wave => p * (2.0 * prev - prev2),
            };
            c[(j, k)] = next;
            prev2 = prev;
            prev = next;
        }
    }
    Ok(c)
}

/// Reduced descriptors for all vertices at once: `f_i(t_k) = Σ_j V_ij² c_j^k`.
///
/// With `reference` the given grid is used verbatim (a transformed shape
/// reusing the reference shape's horizon); otherwise `adapt` rescales the
/// horizon from this model's own spectrum.
pub fn mcr_descriptors(
    model: &ReducedModelMcr,
    grid: &TimeGrid,
    pde: Pde,
    adapt: bool,
    reference: Option<&TimeGrid>,
) -> Result<DescriptorField, MorError> {
    let g = effective_grid(model, grid, pde, adapt, reference)?;
    let c = mode_coefficients(model.pairs().values(), &g, pde)?;
    let v = model.pairs().vectors();
    let v2 = v.component_mul(v);
    let f = v2 * c;
    // row-major copy out of column-major storage
    let n = f.nrows();
    let mut values = Vec::with_capacity(n * g.levels());
    for i in 0..n {
        values.extend(f.row(i).iter());
    }
    Ok(DescriptorField::new(n, values, Some(pde), Method::Mcr, Sampling::Time(g))?)
}
