//! Sparse linear algebra: storage, direct and iterative solves, eigenpairs.

mod cg;
mod eigen;
mod ldl;
mod sparse;

pub use cg::{cg_solve, CgOutcome};
pub use eigen::{eig_largest_magnitude, eig_smallest, EigenMode, EigenPairs, Orthogonality};
pub use ldl::{factorize, minimum_degree_order, Factorization};
pub use sparse::CsrMatrix;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("zero or near-zero pivot at column {column}")]
    SingularPivot { column: usize },
    #[error("iteration diverged at step {iteration}")]
    Divergence { iteration: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("eigensolver converged {converged} of {wanted} eigenpairs")]
    EigenNoConvergence { converged: usize, wanted: usize },
}
