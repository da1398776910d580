//! Intrinsic shape descriptors on triangle meshes and correspondence evaluation.
//!
//! The pipeline: [`mesh`] assembles the cotangent operator `L = D^{-1} W`,
//! descriptors come from full-order time integration ([`integrator`]), reduced
//! models ([`mor`]) or kernel signatures ([`spectral`]), and [`correspond`]
//! matches and scores them.

// NaN-rejecting guards are written as `!(x > 0.0)` on purpose; index loops
// mirror the CSR arithmetic.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod correspond;
pub mod descriptor;
pub mod integrator;
pub mod mesh;
pub mod mor;
pub mod solvers;
pub mod spectral;

pub use descriptor::{DescriptorField, Method, Pde, Sampling, TimeGrid};
pub use mesh::{LaplaceOperator, TriangleMesh};

/// Broad class of a failure, for callers that map errors to exit statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input data: unreadable or malformed files, invalid meshes, mismatched fields.
    Data,
    /// A numerical method failed: singular systems, non-convergence, divergence.
    Numerical,
    /// A caller passed an out-of-range parameter.
    Usage,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] mesh::MeshError),
    #[error(transparent)]
    Solver(#[from] solvers::SolverError),
    #[error(transparent)]
    Descriptor(#[from] descriptor::DescriptorError),
    #[error(transparent)]
    Integrator(#[from] integrator::IntegratorError),
    #[error(transparent)]
    Mor(#[from] mor::MorError),
    #[error(transparent)]
    Spectral(#[from] spectral::SpectralError),
    #[error(transparent)]
    Correspond(#[from] correspond::CorrespondError),
}

fn solver_kind(e: &solvers::SolverError) -> ErrorKind {
    use solvers::SolverError::*;
    match e {
        InvalidArgument(_) | Dimension(_) => ErrorKind::Usage,
        _ => ErrorKind::Numerical,
    }
}

fn descriptor_kind(e: &descriptor::DescriptorError) -> ErrorKind {
    match e {
        descriptor::DescriptorError::Grid(_) => ErrorKind::Usage,
        descriptor::DescriptorError::NonFinite { .. } => ErrorKind::Numerical,
        _ => ErrorKind::Data,
    }
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        use ErrorKind::*;
        match self {
            Error::Mesh(mesh::MeshError::NonFiniteCotangent { .. }) => Numerical,
            Error::Mesh(_) => Data,
            Error::Solver(e) => solver_kind(e),
            Error::Descriptor(e) => descriptor_kind(e),
            Error::Integrator(e) => match e {
                integrator::IntegratorError::Vertex { .. } => Usage,
                integrator::IntegratorError::Descriptor(d) => descriptor_kind(d),
                _ => Numerical,
            },
            Error::Mor(e) => match e {
                mor::MorError::InvalidArgument(_) | mor::MorError::Vertex { .. } | mor::MorError::ZeroEigenvalue => Usage,
                mor::MorError::Format(_) | mor::MorError::Io(_) => Data,
                mor::MorError::Descriptor(d) => descriptor_kind(d),
                _ => Numerical,
            },
            Error::Spectral(e) => match e {
                spectral::SpectralError::Grid(_) => Usage,
                spectral::SpectralError::NoNonzeroEigenvalue => Data,
                spectral::SpectralError::Descriptor(d) => descriptor_kind(d),
            },
            Error::Correspond(_) => Data,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
