//! Higher-order conformal decomposition of Lagrange meshes cut by a level set.
//!
//! The pipeline runs on a background mesh of Lagrange triangles or
//! quadrilaterals with nodal level-set values: cut detection
//! ([`levelset`]), interface reconstruction ([`reconstruct`]) and
//! subdivision into curved sub-elements ([`decompose`]).

pub mod decompose;
pub mod geometry;
pub mod levelset;
pub mod mesh;
pub mod reconstruct;
pub mod refelem;
mod scalar;

pub use geometry::{BoundingBox, Point2};
pub use scalar::Real;

pub type BackgroundMeshF64 = mesh::BackgroundMesh<f64>;
pub type BackgroundMeshF32 = mesh::BackgroundMesh<f32>;
pub type ConformingMeshF64 = mesh::ConformingMesh<f64>;
pub type ConformingMeshF32 = mesh::ConformingMesh<f32>;
pub type LevelSetFieldF64 = levelset::LevelSetField<f64>;
pub type LevelSetFieldF32 = levelset::LevelSetField<f32>;
