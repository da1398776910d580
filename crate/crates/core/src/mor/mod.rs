//! Reduced-order descriptors: modal coordinate reduction (MCR) and
//! Krylov-subspace moment matching (KSMOR).

mod ksmor;
mod mcr;

pub use ksmor::{
    ksmor_basis, ksmor_basis_with, ksmor_descriptor, ksmor_descriptors, ksmor_descriptors_with, moments, KrylovBasis,
    KrylovInner, ShiftedSystem,
};
pub use mcr::{adapted_time, mcr_descriptors, mcr_reduce, mcr_reduce_with, ReducedModelMcr};

use crate::descriptor::DescriptorError;
use crate::solvers::SolverError;

#[derive(Debug, thiserror::Error)]
pub enum MorError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("eigensolver failed: {0}")]
    Eigen(#[source] SolverError),
    #[error("linear solve failed: {0}")]
    Solver(#[source] SolverError),
    #[error("largest retained eigenvalue is zero; pass the largest-magnitude nonzero retained eigenvalue")]
    ZeroEigenvalue,
    #[error("reduced step matrix is singular")]
    SingularReducedSystem,
    #[error("vertex {vertex} out of range for {n} vertices")]
    Vertex { vertex: usize, n: usize },
    #[error("malformed reduced-model container: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Descriptor(DescriptorError),
}

impl From<DescriptorError> for MorError {
    fn from(e: DescriptorError) -> Self {
        match e {
            DescriptorError::Format(m) => MorError::Format(m),
            DescriptorError::Io(e) => MorError::Io(e),
            other => MorError::Descriptor(other),
        }
    }
}
