//! Heat and wave kernel signatures from a truncated eigendecomposition.
//!
//! The operator's eigenvalues are non-positive; both kernels work on the
//! magnitudes `|λ_k|`.

use nalgebra::DMatrix;

use crate::descriptor::{DescriptorError, DescriptorField, Method, Sampling};
use crate::solvers::EigenPairs;

#[derive(Debug, thiserror::Error)]
pub enum SpectralError {
    #[error("invalid spectral grid: {0}")]
    Grid(String),
    #[error("no nonzero eigenvalue among the retained modes")]
    NoNonzeroEigenvalue,
    #[error(transparent)]
    Descriptor(#[from] DescriptorError),
}

/// Sample points of a kernel signature.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectralGrid {
    Hks { times: Vec<f64> },
    Wks { energies: Vec<f64>, sigma: f64 },
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite()) && v.windows(2).all(|w| w[0] < w[1])
}

impl SpectralGrid {
    pub fn hks(times: Vec<f64>) -> Result<Self, SpectralError> {
        if times.is_empty() || !strictly_increasing(&times) || times[0] < 0.0 {
            return Err(SpectralError::Grid("HKS times must be non-negative and strictly increasing".into()));
        }
        Ok(SpectralGrid::Hks { times })
    }

    pub fn wks(energies: Vec<f64>, sigma: f64) -> Result<Self, SpectralError> {
        if energies.is_empty() || !strictly_increasing(&energies) {
            return Err(SpectralError::Grid("WKS energies must be strictly increasing".into()));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(SpectralError::Grid(format!("WKS variance must be positive, got {sigma}")));
        }
        Ok(SpectralGrid::Wks { energies, sigma })
    }

    pub fn len(&self) -> usize {
        match self {
            SpectralGrid::Hks { times } => times.len(),
            SpectralGrid::Wks { energies, .. } => energies.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Recovers the grid a field was sampled on, e.g. to reuse a reference shape's grid.
    pub fn from_sampling(s: &Sampling) -> Option<Self> {
        match s {
            Sampling::HksTimes(t) => Some(SpectralGrid::Hks { times: t.clone() }),
            Sampling::WksEnergies { energies, sigma } => {
                Some(SpectralGrid::Wks { energies: energies.clone(), sigma: *sigma })
            }
            Sampling::Time(_) => None,
        }
    }
}

fn is_zero(lambda: f64, scale: f64) -> bool {
    lambda.abs() <= 1e-10 * scale
}

/// Smallest and largest nonzero `|λ|` among the retained modes.
fn nonzero_range(pairs: &EigenPairs) -> Result<(f64, f64), SpectralError> {
    let scale = pairs.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mags: Vec<f64> = pairs.values().iter().filter(|v| !is_zero(**v, scale)).map(|v| v.abs()).collect();
    if mags.is_empty() {
        return Err(SpectralError::NoNonzeroEigenvalue);
    }
    let lo = mags.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = mags.iter().copied().fold(0.0, f64::max);
    Ok((lo, hi))
}

fn linspace(a: f64, b: f64, m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![a];
    }
    (0..m).map(|k| a + (b - a) * k as f64 / (m - 1) as f64).collect()
}

/// `m` log-spaced times on `[4 ln 10 / |λ_r|, 4 ln 10 / |λ_2|]`.
pub fn default_hks_grid(pairs: &EigenPairs, m: usize) -> Result<SpectralGrid, SpectralError> {
    if m == 0 {
        return Err(SpectralError::Grid("at least one sample is required".into()));
    }
    let (lo, hi) = nonzero_range(pairs)?;
    let c = 4.0 * std::f64::consts::LN_10;
    let (t0, t1) = (c / hi, c / lo);
    let times = linspace(t0.ln(), t1.ln(), m).into_iter().map(f64::exp).collect();
    SpectralGrid::hks(times)
}

/// `m` energies on `[log|λ_2| + 2σ, log|λ_r| - 2σ]` with `σ = 7 (log|λ_r| - log|λ_2|) / m`.
///
/// When the margins overlap (few samples) the unpadded range is used instead.
pub fn default_wks_grid(pairs: &EigenPairs, m: usize) -> Result<SpectralGrid, SpectralError> {
    if m == 0 {
        return Err(SpectralError::Grid("at least one sample is required".into()));
    }
    let (lo, hi) = nonzero_range(pairs)?;
    let (e0, e1) = (lo.ln(), hi.ln());
    let sigma = 7.0 * (e1 - e0) / m as f64;
    if !(sigma > 0.0) {
        return Err(SpectralError::Grid("WKS needs at least two distinct nonzero eigenvalues".into()));
    }
    let (a, b) = if e0 + 2.0 * sigma < e1 - 2.0 * sigma {
        (e0 + 2.0 * sigma, e1 - 2.0 * sigma)
    } else {
        log::debug!("WKS energy margins overlap for {m} samples; using the unpadded range");
        (e0, e1)
    };
    SpectralGrid::wks(linspace(a, b, m), sigma)
}

/// `Σ_k w_k(s) φ_k(x)²` for an `r x M` weight matrix, as a row-major field.
fn weighted_squares(pairs: &EigenPairs, weights: &DMatrix<f64>) -> Vec<f64> {
    let v = pairs.vectors();
    let f = v.component_mul(v) * weights;
    let mut values = Vec::with_capacity(f.len());
    for i in 0..f.nrows() {
        values.extend(f.row(i).iter());
    }
    values
}

/// `HKS(x, t) = Σ_k exp(-|λ_k| t) φ_k(x)²`.
pub fn hks(pairs: &EigenPairs, grid: &SpectralGrid) -> Result<DescriptorField, SpectralError> {
    let SpectralGrid::Hks { times } = grid else {
        return Err(SpectralError::Grid("HKS needs a time grid".into()));
    };
    let lambda = pairs.values();
    let w = DMatrix::from_fn(lambda.len(), times.len(), |k, j| (-lambda[k].abs() * times[j]).exp());
    let values = weighted_squares(pairs, &w);
    Ok(DescriptorField::new(pairs.dim(), values, None, Method::Hks, Sampling::HksTimes(times.clone()))?)
}

/// `WKS(x, e) = Σ_k |α_k(e)|² φ_k(x)² / Σ_k |α_k(e)|²`, `|α_k(e)|² = exp(-(e - log|λ_k|)² / 2σ²)`.
///
/// Zero eigenvalues are skipped.
pub fn wks(pairs: &EigenPairs, grid: &SpectralGrid) -> Result<DescriptorField, SpectralError> {
    let SpectralGrid::Wks { energies, sigma } = grid else {
        return Err(SpectralError::Grid("WKS needs an energy grid".into()));
    };
    let lambda = pairs.values();
    let scale = lambda.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let logs: Vec<Option<f64>> =
        lambda.iter().map(|l| (!is_zero(*l, scale)).then(|| l.abs().ln())).collect();
    if logs.iter().all(Option::is_none) {
        return Err(SpectralError::NoNonzeroEigenvalue);
    }
    let two_s2 = 2.0 * sigma * sigma;
    let mut w = DMatrix::<f64>::zeros(lambda.len(), energies.len());
    for (j, &e) in energies.iter().enumerate() {
        // shift exponents by their minimum so far-away energies do not underflow to 0/0
        let closest = logs.iter().flatten().map(|l| (e - l).powi(2)).fold(f64::INFINITY, f64::min);
        let mut total = 0.0;
        for (k, l) in logs.iter().enumerate() {
            if let Some(l) = l {
                let a = (-((e - l).powi(2) - closest) / two_s2).exp();
                w[(k, j)] = a;
                total += a;
            }
        }
        w.column_mut(j).scale_mut(1.0 / total);
    }
    let values = weighted_squares(pairs, &w);
    let sampling = Sampling::WksEnergies { energies: energies.clone(), sigma: *sigma };
    Ok(DescriptorField::new(pairs.dim(), values, None, Method::Wks, sampling)?)
}
