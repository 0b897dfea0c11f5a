//! Background meshes, edge adjacency and the conforming output mesh.

mod adjacency;
mod conforming;
pub mod io;
pub mod vtk;

use thiserror::Error;

use crate::refelem::{isoparametric_map, quadrature, Family, RefElemError, ReferenceElement};
use crate::{BoundingBox, Point2, Real};

pub use adjacency::{edge_adjacency, EdgeAdjacency, EdgeIncidence, MeshEdge};
pub use conforming::{
    ConformingElement, ConformingMesh, ConformityReport, InterfaceFacet, Side,
};

#[derive(Debug, Error)]
pub enum MeshError {
    #[error(transparent)]
    RefElem(#[from] RefElemError),
    #[error("edge ({0}, {1}) is shared by more than two elements")]
    NonManifold(usize, usize),
    #[error("edge ({0}, {1}) has mismatched node sequences in its incident elements")]
    HangingNodes(usize, usize),
    #[error("element {element} has {got} nodes, expected {expected}")]
    NodeCount { element: usize, got: usize, expected: usize },
    #[error("element {element} references node {node} out of range")]
    NodeIndex { element: usize, node: usize },
    #[error("deformation too large: element {element} has Jacobian {det:e}")]
    DeformationTooLarge { element: usize, det: f64 },
    #[error("invalid mesh parameter: {0}")]
    Parameter(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Element {
    pub family: Family,
    pub order: usize,
    pub nodes: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct BackgroundMesh<T = f64> {
    pub nodes: Vec<Point2<T>>,
    pub elements: Vec<Element>,
    pub domain: BoundingBox<T>,
    /// Characteristic element length.
    pub h: T,
    adjacency: EdgeAdjacency,
}

impl<T: Real> BackgroundMesh<T> {
    /// Validates connectivity and builds the edge adjacency.
    pub fn new(
        nodes: Vec<Point2<T>>,
        elements: Vec<Element>,
        domain: BoundingBox<T>,
        h: T,
    ) -> Result<Self, MeshError> {
        for (k, el) in elements.iter().enumerate() {
            let expected = el.family.node_count(el.order);
            if el.nodes.len() != expected {
                return Err(MeshError::NodeCount { element: k, got: el.nodes.len(), expected });
            }
            if let Some(&n) = el.nodes.iter().find(|&&n| n >= nodes.len()) {
                return Err(MeshError::NodeIndex { element: k, node: n });
            }
        }
        let adjacency = adjacency::build(&elements)?;
        Ok(Self { nodes, elements, domain, h, adjacency })
    }

    pub fn adjacency(&self) -> &EdgeAdjacency {
        &self.adjacency
    }

    /// The common element order. Panics on an empty mesh.
    pub fn order(&self) -> usize {
        self.elements[0].order
    }

    pub fn element_coords(&self, e: usize) -> Vec<Point2<T>> {
        self.elements[e].nodes.iter().map(|&n| self.nodes[n]).collect()
    }

    /// Smallest Jacobian determinant over the order-`2m` quadrature points of
    /// every element, with the element attaining it.
    pub fn min_jacobian(&self) -> Result<(usize, T), MeshError> {
        let mut cache = RefCache::default();
        let mut worst = (0, T::infinity());
        for (k, el) in self.elements.iter().enumerate() {
            let re = cache.get(el.family, el.order)?;
            let q = quadrature::<T>(el.family, 2 * el.order)?;
            let coords = self.element_coords(k);
            for &p in &q.points {
                let d = isoparametric_map(re, &coords, p).det;
                if d < worst.1 {
                    worst = (k, d);
                }
            }
        }
        Ok(worst)
    }
}

/// Small cache of reference elements keyed by family and order.
#[derive(Clone, Debug, Default)]
pub struct RefCache<T = f64> {
    items: Vec<ReferenceElement<T>>,
}

impl<T: Real> RefCache<T> {
    pub fn get(&mut self, family: Family, order: usize) -> Result<&ReferenceElement<T>, RefElemError> {
        if let Some(i) = self.items.iter().position(|r| r.family() == family && r.order() == order) {
            return Ok(&self.items[i]);
        }
        self.items.push(ReferenceElement::new(family, order)?);
        Ok(self.items.last().expect("just pushed"))
    }
}

/// Structured `ℓ × ℓ` mesh of `domain`. Triangles come from splitting each
/// cell along its lower-left to upper-right diagonal.
pub fn build_cartesian<T: Real>(
    domain: BoundingBox<T>,
    cells_per_side: usize,
    family: Family,
    order: usize,
) -> Result<BackgroundMesh<T>, MeshError> {
    if cells_per_side == 0 {
        return Err(MeshError::Parameter("cells per side must be at least 1".into()));
    }
    if family == Family::Line {
        return Err(MeshError::Parameter("background meshes are two-dimensional".into()));
    }
    // validates the order
    ReferenceElement::<T>::new(family, order)?;
    let l = cells_per_side;
    let m = order;
    let n = l * m;
    let coord = |lo: T, hi: T, k: usize| {
        if k == n {
            hi
        } else {
            lo + (hi - lo) * T::from_count(k) / T::from_count(n)
        }
    };
    let mut nodes = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            nodes.push(Point2::new(coord(domain.min.x, domain.max.x, i), coord(domain.min.y, domain.max.y, j)));
        }
    }
    let gid = |i: usize, j: usize| j * (n + 1) + i;
    let quad = ReferenceElement::<T>::new(Family::Quadrilateral, m)?;
    let tri = ReferenceElement::<T>::new(Family::Triangle, m)?;
    let mut elements = Vec::new();
    for ey in 0..l {
        for ex in 0..l {
            let (ox, oy) = (ex * m, ey * m);
            match family {
                Family::Quadrilateral => {
                    let ids = quad.lattice().iter().map(|&(i, j)| gid(ox + i, oy + j)).collect();
                    elements.push(Element { family, order: m, nodes: ids });
                }
                _ => {
                    let lower = tri.lattice().iter().map(|&(i, j)| gid(ox + i + j, oy + j)).collect();
                    let upper = tri.lattice().iter().map(|&(i, j)| gid(ox + i, oy + i + j)).collect();
                    elements.push(Element { family, order: m, nodes: lower });
                    elements.push(Element { family, order: m, nodes: upper });
                }
            }
        }
    }
    let h = domain.width() / T::from_count(l);
    BackgroundMesh::new(nodes, elements, domain, h)
}

/// Smooth interior perturbation
/// `x' = x + δ h (sin πξ sin πη, sin 2πξ sin πη)` with `(ξ, η)` the node
/// position normalized to [-1, 1]² over the domain box. Boundary nodes stay.
pub fn deform<T: Real>(mesh: &BackgroundMesh<T>, amplitude: T) -> Result<BackgroundMesh<T>, MeshError> {
    if amplitude < T::zero() {
        return Err(MeshError::Parameter("deformation amplitude must be non-negative".into()));
    }
    let d = mesh.domain;
    let two = T::lit(2.0);
    let pi = T::PI();
    let tol = T::lit(1e-14) * d.width().max(d.height());
    let nodes = mesh
        .nodes
        .iter()
        .map(|&p| {
            if amplitude == T::zero() || d.on_boundary(p, tol) {
                return p;
            }
            let xi = two * (p.x - d.min.x) / d.width() - T::one();
            let eta = two * (p.y - d.min.y) / d.height() - T::one();
            let s = amplitude * mesh.h;
            p + Point2::new(
                s * (pi * xi).sin() * (pi * eta).sin(),
                s * (two * pi * xi).sin() * (pi * eta).sin(),
            )
        })
        .collect();
    let out = BackgroundMesh::new(nodes, mesh.elements.clone(), d, mesh.h)?;
    let (element, det) = out.min_jacobian()?;
    if det <= T::zero() {
        return Err(MeshError::DeformationTooLarge { element, det: det.to_f64_lossy() });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> BoundingBox<f64> {
        BoundingBox::new(Point2::new(0.0, 0.0), Point2::new(1.0, 1.0))
    }

    #[test]
    fn cartesian_counts() {
        let sq = BoundingBox::symmetric_unit();
        let m1 = build_cartesian::<f64>(sq, 8, Family::Quadrilateral, 1).unwrap();
        assert_eq!((m1.elements.len(), m1.nodes.len()), (64, 81));
        let m3 = build_cartesian::<f64>(sq, 8, Family::Quadrilateral, 3).unwrap();
        assert_eq!((m3.elements.len(), m3.nodes.len()), (64, 625));
        let t2 = build_cartesian(unit(), 2, Family::Triangle, 2).unwrap();
        assert_eq!((t2.elements.len(), t2.nodes.len()), (8, 25));
        assert!((m3.h - 0.25).abs() < 1e-15);
    }

    #[test]
    fn cartesian_elements_are_positively_oriented() {
        for family in [Family::Triangle, Family::Quadrilateral] {
            for m in 1..=4 {
                let mesh = build_cartesian(unit(), 3, family, m).unwrap();
                let (_, det) = mesh.min_jacobian().unwrap();
                assert!(det > 0.0);
            }
        }
    }

    #[test]
    fn zero_cells_rejected() {
        assert!(build_cartesian(unit(), 0, Family::Quadrilateral, 1).is_err());
        assert!(build_cartesian(unit(), 2, Family::Quadrilateral, 9).is_err());
    }

    #[test]
    fn deform_zero_is_identity() {
        let mesh = build_cartesian(BoundingBox::symmetric_unit(), 4, Family::Quadrilateral, 2).unwrap();
        let d = deform(&mesh, 0.0).unwrap();
        assert_eq!(d.nodes, mesh.nodes);
    }

    #[test]
    fn deform_keeps_boundary_and_orientation() {
        let sq = BoundingBox::symmetric_unit();
        let mesh = build_cartesian(sq, 8, Family::Quadrilateral, 2).unwrap();
        let d = deform(&mesh, 0.2).unwrap();
        let mut moved = 0;
        for (a, b) in mesh.nodes.iter().zip(&d.nodes) {
            if sq.on_boundary(*a, 1e-14) {
                assert_eq!(a, b);
            } else if a != b {
                moved += 1;
            }
        }
        assert!(moved > 0);
        assert!(d.min_jacobian().unwrap().1 > 0.0);
    }

    #[test]
    fn huge_deformation_is_rejected() {
        let mesh = build_cartesian(BoundingBox::symmetric_unit(), 8, Family::Quadrilateral, 1).unwrap();
        assert!(matches!(deform(&mesh, 5.0), Err(MeshError::DeformationTooLarge { .. })));
    }

    #[test]
    fn bad_connectivity_is_reported() {
        let nodes = vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)];
        let e = Element { family: Family::Triangle, order: 1, nodes: vec![0, 1] };
        assert!(matches!(
            BackgroundMesh::new(nodes.clone(), vec![e], unit(), 1.0),
            Err(MeshError::NodeCount { .. })
        ));
        let e = Element { family: Family::Triangle, order: 1, nodes: vec![0, 1, 7] };
        assert!(matches!(BackgroundMesh::new(nodes, vec![e], unit(), 1.0), Err(MeshError::NodeIndex { .. })));
    }
}
