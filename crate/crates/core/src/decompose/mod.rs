//! Conformal decomposition of cut elements into curved sub-elements.
//!
//! Cut cells are classified by where the two interface crossings sit,
//! non-local configurations are split first, and every locally cut cell is
//! replaced by straight sub-cells whose interface edge is then bent onto the
//! reconstructed interface. Failing cells are refined uniformly.

mod driver;
mod psi;
mod subcell;
mod topology;

use thiserror::Error;

use crate::mesh::MeshError;
use crate::reconstruct::NewtonOptions;
use crate::refelem::{isoparametric_map, quadrature, Family, RefElemError, ReferenceElement};
use crate::{Point2, Real};

pub use driver::{
    decompose_mesh, interface_residual, nonlocal_presplit, Decomposition, DecomposeStats, LinearCell, SplitEntry,
    SplitLog,
};
pub use psi::{edge_deviation, map_subcell_nodes, quad_blend, triangle_blend, PsiVariant};
pub use subcell::{local_subdivide, template, SubCell, Template, TemplateCell, Vertex};
pub use topology::{classify_topology, CutKind, TopologyCode};

#[derive(Debug, Error)]
pub enum DecomposeError {
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("element {element} still fails after {levels} refinement levels: {reason}")]
    RefinementExhausted { element: usize, levels: usize, reason: String },
    #[error("invalid option: {0}")]
    Parameter(String),
    #[error(transparent)]
    RefElem(#[from] RefElemError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecomposeOptions {
    /// Interface element order; the background order when `None`.
    pub interface_order: Option<usize>,
    /// Mapping of curved triangles. Quadrilaterals always use ramp blending.
    pub psi: PsiVariant,
    pub grid_samples: usize,
    pub max_refine: usize,
    pub newton: NewtonOptions,
    pub parallel: bool,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        Self {
            interface_order: None,
            psi: PsiVariant::Solin,
            grid_samples: crate::levelset::DEFAULT_GRID_SAMPLES,
            max_refine: 4,
            newton: NewtonOptions::default(),
            parallel: true,
        }
    }
}

/// Jacobian threshold for an element with `points` quadrature points.
pub fn jacobian_tolerance<T: Real>(family: Family, points: usize) -> T {
    T::tol(1e-12 * family.measure() / points.max(1) as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct JacobianCheck<T = f64> {
    pub min_det: T,
    /// Indices of elements whose Jacobian drops to the threshold.
    pub failed: Vec<usize>,
}

impl<T> JacobianCheck<T> {
    pub fn ok(&self) -> bool {
        self.failed.is_empty()
    }
}

/// Smallest Jacobian of one element over its assembly points (degree `2m + 2`).
pub fn element_min_jacobian<T: Real>(re: &ReferenceElement<T>, coords: &[Point2<T>]) -> Result<(T, usize), RefElemError> {
    let q = quadrature::<T>(re.family(), 2 * re.order() + 2)?;
    let min = q
        .points
        .iter()
        .map(|&p| isoparametric_map(re, coords, p).det)
        .fold(T::infinity(), T::min);
    Ok((min, q.points.len()))
}

/// Checks `(family, order, nodes)` elements for a strictly positive Jacobian.
pub fn validate_jacobians<T: Real>(elements: &[(Family, usize, Vec<Point2<T>>)]) -> Result<JacobianCheck<T>, RefElemError> {
    let mut cache = crate::mesh::RefCache::<T>::default();
    let mut out = JacobianCheck { min_det: T::infinity(), failed: Vec::new() };
    for (k, (family, order, coords)) in elements.iter().enumerate() {
        let re = cache.get(*family, *order)?;
        let (d, n) = element_min_jacobian(re, coords)?;
        out.min_det = out.min_det.min(d);
        if d <= jacobian_tolerance(*family, n) {
            out.failed.push(k);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_and_mirrored_triangles() {
        let re = ReferenceElement::<f64>::new(Family::Triangle, 2).unwrap();
        let c = [Point2::new(0.0, 0.0), Point2::new(0.5, 0.1), Point2::new(0.2, 0.4)];
        let nodes = map_subcell_nodes(&re, &c, None, PsiVariant::Solin);
        let mirrored: Vec<Point2<f64>> = nodes.iter().map(|p| Point2::new(-p.x, p.y)).collect();
        let check = validate_jacobians(&[(Family::Triangle, 2, nodes), (Family::Triangle, 2, mirrored)]).unwrap();
        assert_eq!(check.failed, vec![1]);
        assert!(check.min_det < 0.0);
    }

    #[test]
    fn jacobian_tolerance_scales_with_points() {
        let t: f64 = jacobian_tolerance(Family::Quadrilateral, 4);
        assert!((t - 1e-12).abs() < 1e-27);
    }
}
