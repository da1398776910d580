//! Full-order implicit Euler for the semi-discrete heat and wave equations.
//!
//! Both PDEs are stepped in symmetric form, `(D - τW) u^k = D u^{k-1}` and
//! `(D - τ²W) u^k = D (2u^{k-1} - u^{k-2})`, starting from the discrete delta
//! `u^0 = e_i / |Ω_i|` at each vertex in turn.

use rayon::prelude::*;

use crate::descriptor::{DescriptorError, DescriptorField, Method, Pde, Sampling, TimeGrid};
use crate::mesh::LaplaceOperator;
use crate::solvers::{cg_solve, factorize, CsrMatrix, Factorization, SolverError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Solver {
    /// One sparse factorization of the step matrix, reused for every solve.
    Direct,
    /// Conjugate gradients warm-started from the previous time level.
    Cg { eps: f64, max_iters: usize },
}

#[derive(Debug, thiserror::Error)]
pub enum IntegratorError {
    #[error("solve failed for vertex {vertex} at step {step}: {source}")]
    Solve {
        vertex: usize,
        step: usize,
        #[source]
        source: SolverError,
    },
    #[error("factorization of the step matrix failed: {0}")]
    Factorization(#[source] SolverError),
    #[error("vertex {vertex} out of range for {n} vertices")]
    Vertex { vertex: usize, n: usize },
    #[error(transparent)]
    Descriptor(#[from] DescriptorError),
}

enum Backend {
    Direct(Factorization),
    Cg { eps: f64, max_iters: usize },
}

/// Step matrix and the means to solve with it; shared read-only across vertices.
struct Stepper<'a> {
    op: &'a LaplaceOperator,
    matrix: CsrMatrix,
    backend: Backend,
    pde: Pde,
}

impl<'a> Stepper<'a> {
    fn new(op: &'a LaplaceOperator, grid: &TimeGrid, pde: Pde, solver: Solver) -> Result<Self, IntegratorError> {
        let tau = grid.step();
        let c = match pde {
            Pde::Heat => tau,
            Pde::Wave => tau * tau,
        };
        let matrix = op.implicit_matrix(c);
        let backend = match solver {
            Solver::Direct => Backend::Direct(factorize(&matrix).map_err(IntegratorError::Factorization)?),
            Solver::Cg { eps, max_iters } => Backend::Cg { eps, max_iters },
        };
        Ok(Self { op, matrix, backend, pde })
    }

    fn solve(&self, rhs: &[f64], warm: &[f64], work: &mut [f64]) -> Result<Vec<f64>, SolverError> {
        match &self.backend {
            Backend::Direct(f) => {
                let mut x = rhs.to_vec();
                f.solve_in_place(&mut x, work);
                Ok(x)
            }
            Backend::Cg { eps, max_iters } => cg_solve(&self.matrix, rhs, *eps, *max_iters, warm).map(|o| o.x),
        }
    }

    /// Calls `visit(k, u^k)` for `k = 1..=levels`.
    fn run(
        &self,
        vertex: usize,
        levels: usize,
        mut visit: impl FnMut(usize, &[f64]),
    ) -> Result<(), IntegratorError> {
        let n = self.op.dim();
        let d = self.op.areas();
        let mut work = vec![0.0; n];
        let mut prev = vec![0.0; n];
        prev[vertex] = 1.0 / d[vertex];
        let mut prev2: Vec<f64> = Vec::new();
        // D u^0 = e_i
        let mut rhs = vec![0.0; n];
        rhs[vertex] = 1.0;
        for k in 1..=levels {
            if k > 1 {
                match self.pde {
                    Pde::Heat => {
                        for ((r, u), a) in rhs.iter_mut().zip(&prev).zip(d) {
                            *r = a * u;
                        }
                    }
                    Pde::Wave => {
                        for (((r, u), v), a) in rhs.iter_mut().zip(&prev).zip(&prev2).zip(d) {
                            *r = a * (2.0 * u - v);
                        }
                    }
                }
            }
            let next = self
                .solve(&rhs, &prev, &mut work)
                .map_err(|source| IntegratorError::Solve { vertex, step: k, source })?;
            visit(k, &next);
            prev2 = std::mem::replace(&mut prev, next);
        }
        Ok(())
    }
}

fn integrate(op: &LaplaceOperator, grid: &TimeGrid, pde: Pde, solver: Solver) -> Result<DescriptorField, IntegratorError> {
    let stepper = Stepper::new(op, grid, pde, solver)?;
    let m = grid.levels();
    let rows: Vec<Vec<f64>> = (0..op.dim())
        .into_par_iter()
        .map(|i| {
            let mut row = Vec::with_capacity(m);
            stepper.run(i, m, |_, u| row.push(u[i]))?;
            Ok(row)
        })
        .collect::<Result<_, IntegratorError>>()?;
    let values = rows.concat();
    Ok(DescriptorField::new(op.dim(), values, Some(pde), Method::Full, Sampling::Time(*grid))?)
}

/// Heat descriptors `f_{x_i}(t_k) = u^k_i` for every vertex `i`, `k = 1..=M`.
pub fn heat_full(op: &LaplaceOperator, grid: &TimeGrid, solver: Solver) -> Result<DescriptorField, IntegratorError> {
    integrate(op, grid, Pde::Heat, solver)
}

/// Wave descriptors with zero initial velocity.
pub fn wave_full(op: &LaplaceOperator, grid: &TimeGrid, solver: Solver) -> Result<DescriptorField, IntegratorError> {
    integrate(op, grid, Pde::Wave, solver)
}

/// Full states `u^1..u^M` for one initial vertex.
pub fn trajectory(
    op: &LaplaceOperator,
    grid: &TimeGrid,
    pde: Pde,
    solver: Solver,
    vertex: usize,
) -> Result<Vec<Vec<f64>>, IntegratorError> {
    if vertex >= op.dim() {
        return Err(IntegratorError::Vertex { vertex, n: op.dim() });
    }
    let stepper = Stepper::new(op, grid, pde, solver)?;
    let mut states = Vec::with_capacity(grid.levels());
    stepper.run(vertex, grid.levels(), |_, u| states.push(u.to_vec()))?;
    Ok(states)
}
