//! Benchmark drivers, convergence reports and verification suites for the
//! conformal decomposition and the finite element layer.

pub mod cli;
pub mod config;
pub mod drivers;
pub mod report;
pub mod verify;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{Benchmark, BenchmarkConfig, MeshKind, Thresholds};
pub use drivers::{evaluate, run, run_bimaterial, run_condition_sweep, run_flower, run_plate_hole, run_projection, Check, Outcome};
pub use report::{fit_slope, last_slope, ConditionReport, ConvergenceReport, Row};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("configuration: {0}")]
    Config(String),
    #[error("{context}: {source}")]
    Decompose { context: String, source: cdfem::decompose::DecomposeError },
    #[error("{context}: {source}")]
    Fem { context: String, source: cdfem_fem::FemError },
    #[error(transparent)]
    Mesh(#[from] cdfem::mesh::MeshError),
    #[error(transparent)]
    RefElem(#[from] cdfem::refelem::RefElemError),
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
}

impl BenchError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        BenchError::Io { path: path.to_path_buf(), source }
    }
}

impl From<cdfem_fem::FemError> for BenchError {
    fn from(source: cdfem_fem::FemError) -> Self {
        BenchError::Fem { context: "finite element".into(), source }
    }
}
