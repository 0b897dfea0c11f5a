//! Finite elements on conforming decomposed meshes: L2 projection,
//! plane-strain elasticity with strong Dirichlet data, error norms and
//! condition estimates.

mod assembly;
mod condition;
pub mod exact;
mod field;
mod material;
mod norms;
mod solve;
mod sparse;

use thiserror::Error;

pub use assembly::{assemble_elasticity, assemble_elasticity_with, assemble_mass, l2_project, LinearSystem, QuadratureDegree};
pub use condition::{condition_number, ConditionEstimate, EigenOptions};
pub use exact::{ExactSolution, ExactValue};
pub use field::DofField;
pub use material::{Material, MaterialRegion, Materials};
pub use norms::{error_norms, integrate, ErrorNorms};
pub use solve::{apply_dirichlet_and_solve, box_boundary_nodes, constrain, solve, Cholesky, Solution};
pub use sparse::SparseMatrix;

use cdfem::refelem::RefElemError;

#[derive(Debug, Error)]
pub enum FemError {
    #[error("element {element}: non-positive Jacobian {det:e} at a quadrature point")]
    Jacobian { element: usize, det: f64 },
    #[error("singular system: {0}")]
    Singular(String),
    #[error("invalid material: {0}")]
    Material(String),
    #[error("exact solution is not defined at ({x}, {y}): {reason}")]
    Domain { x: f64, y: f64, reason: String },
    #[error("norm of the exact solution vanishes")]
    ZeroNorm,
    #[error("eigenvalue estimate did not converge in {0} iterations")]
    EstimateFailed(usize),
    #[error("{0}")]
    Parameter(String),
    #[error(transparent)]
    RefElem(#[from] RefElemError),
}
