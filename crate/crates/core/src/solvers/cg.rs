use super::{CsrMatrix, SolverError};

/// Result of a conjugate-gradient run.
#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `||b - A x|| / ||b||` of the returned iterate (recursively updated residual).
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Conjugate gradients for symmetric positive definite `a`.
///
/// Stops as soon as the relative residual drops to `eps` or after
/// `max_iters` iterations, whichever comes first.
pub fn cg_solve(
    a: &CsrMatrix,
    b: &[f64],
    eps: f64,
    max_iters: usize,
    x0: &[f64],
) -> Result<CgOutcome, SolverError> {
    let n = a.nrows();
    if !a.is_square() || b.len() != n || x0.len() != n {
        return Err(SolverError::Dimension("cg: matrix, rhs and start vector disagree".into()));
    }
    if !(eps > 0.0) || max_iters == 0 {
        return Err(SolverError::InvalidArgument("cg needs eps > 0 and max_iters >= 1".into()));
    }
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return Ok(CgOutcome { x: vec![0.0; n], iterations: 0, relative_residual: 0.0 });
    }
    let mut x = x0.to_vec();
    let mut r = a.mul_vec(&x);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut rr = dot(&r, &r);
    let mut rel = rr.sqrt() / bnorm;
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut iterations = 0;
    while rel > eps && iterations < max_iters {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        let alpha = rr / pap;
        if !alpha.is_finite() {
            return Err(SolverError::Divergence { iteration: iterations });
        }
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        iterations += 1;
        rel = rr_new.sqrt() / bnorm;
        if !rel.is_finite() {
            return Err(SolverError::Divergence { iteration: iterations });
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    Ok(CgOutcome { x, iterations, relative_residual: rel })
}
