//! Reference elements, Lagrange shape functions, quadrature and the
//! isoparametric map.
//!
//! Node layouts are equispaced lattices. For a quadrilateral of order `m`
//! node `(i, j)` sits at `(-1 + 2i/m, -1 + 2j/m)` with index `j(m+1) + i`.
//! For a triangle node `(i, j)`, `i + j <= m`, sits at `(i/m, j/m)` on the
//! unit triangle, numbered row by row in `j`. Lines carry `u_k = -1 + 2k/m`.
//!
//! Vertices are numbered counterclockwise and edge `e` runs from vertex `e`
//! to vertex `e + 1`.

mod lagrange;
mod mapping;
mod quadrature;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::{Point2, Real};

pub use mapping::{isoparametric_map, line_map, IsoMap, LineMap};
pub use quadrature::{gauss_legendre, quadrature, QuadratureRule, MAX_GAUSS_POINTS, MAX_QUADRATURE_DEGREE};

/// Highest supported polynomial order.
pub const MAX_ORDER: usize = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RefElemError {
    #[error("unsupported order {order} for {family} elements (supported 1..={max})")]
    UnsupportedOrder { family: Family, order: usize, max: usize },
    #[error("unsupported quadrature degree {degree} (max {max})")]
    UnsupportedDegree { degree: usize, max: usize },
    #[error("unknown element family `{0}`")]
    UnknownFamily(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Line,
    Triangle,
    Quadrilateral,
}

impl Family {
    pub fn vertex_count(self) -> usize {
        match self {
            Family::Line => 2,
            Family::Triangle => 3,
            Family::Quadrilateral => 4,
        }
    }

    pub fn edge_count(self) -> usize {
        match self {
            Family::Line => 1,
            f => f.vertex_count(),
        }
    }

    /// Length or area of the reference domain.
    pub fn measure(self) -> f64 {
        match self {
            Family::Line => 2.0,
            Family::Triangle => 0.5,
            Family::Quadrilateral => 4.0,
        }
    }

    pub fn node_count(self, order: usize) -> usize {
        match self {
            Family::Line => order + 1,
            Family::Triangle => (order + 1) * (order + 2) / 2,
            Family::Quadrilateral => (order + 1) * (order + 1),
        }
    }

    pub fn reference_vertices<T: Real>(self) -> Vec<Point2<T>> {
        let p = |x: f64, y: f64| Point2::new(T::lit(x), T::lit(y));
        match self {
            Family::Line => vec![p(-1.0, 0.0), p(1.0, 0.0)],
            Family::Triangle => vec![p(0.0, 0.0), p(1.0, 0.0), p(0.0, 1.0)],
            Family::Quadrilateral => vec![p(-1.0, -1.0), p(1.0, -1.0), p(1.0, 1.0), p(-1.0, 1.0)],
        }
    }

    /// Reference centroid.
    pub fn centroid<T: Real>(self) -> Point2<T> {
        match self {
            Family::Triangle => Point2::new(T::lit(1.0 / 3.0), T::lit(1.0 / 3.0)),
            _ => Point2::zero(),
        }
    }

    /// Whether `p` lies in the closed reference domain, with slack `tol`.
    pub fn contains<T: Real>(self, p: Point2<T>, tol: T) -> bool {
        let one = T::one();
        match self {
            Family::Line => p.x >= -one - tol && p.x <= one + tol,
            Family::Triangle => p.x >= -tol && p.y >= -tol && p.x + p.y <= one + tol,
            Family::Quadrilateral => {
                p.x >= -one - tol && p.x <= one + tol && p.y >= -one - tol && p.y <= one + tol
            }
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Line => "line",
            Family::Triangle => "triangle",
            Family::Quadrilateral => "quadrilateral",
        })
    }
}

impl FromStr for Family {
    type Err = RefElemError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "line" => Ok(Family::Line),
            "triangle" | "tri" => Ok(Family::Triangle),
            "quadrilateral" | "quad" => Ok(Family::Quadrilateral),
            other => Err(RefElemError::UnknownFamily(other.to_string())),
        }
    }
}

/// Shape function values and reference gradients at one point.
#[derive(Clone, Debug, Default)]
pub struct ShapeValues<T = f64> {
    pub values: Vec<T>,
    /// `(dN/dr, dN/ds)`; the second component is zero for lines.
    pub gradients: Vec<[T; 2]>,
}

#[derive(Clone, Debug)]
pub struct ReferenceElement<T = f64> {
    family: Family,
    order: usize,
    nodes: Vec<Point2<T>>,
    lattice: Vec<(usize, usize)>,
}

impl<T: Real> ReferenceElement<T> {
    pub fn new(family: Family, order: usize) -> Result<Self, RefElemError> {
        if order == 0 || order > MAX_ORDER {
            return Err(RefElemError::UnsupportedOrder { family, order, max: MAX_ORDER });
        }
        let m = order;
        let step = |k: usize| T::from_count(k) / T::from_count(m);
        let mut lattice = Vec::with_capacity(family.node_count(m));
        let mut nodes = Vec::with_capacity(family.node_count(m));
        match family {
            Family::Line => {
                for i in 0..=m {
                    lattice.push((i, 0));
                    nodes.push(Point2::new(-T::one() + T::lit(2.0) * step(i), T::zero()));
                }
            }
            Family::Triangle => {
                for j in 0..=m {
                    for i in 0..=m - j {
                        lattice.push((i, j));
                        nodes.push(Point2::new(step(i), step(j)));
                    }
                }
            }
            Family::Quadrilateral => {
                for j in 0..=m {
                    for i in 0..=m {
                        lattice.push((i, j));
                        nodes.push(Point2::new(
                            -T::one() + T::lit(2.0) * step(i),
                            -T::one() + T::lit(2.0) * step(j),
                        ));
                    }
                }
            }
        }
        Ok(Self { family, order, nodes, lattice })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Point2<T>] {
        &self.nodes
    }

    /// Lattice coordinates `(i, j)` of every node.
    pub fn lattice(&self) -> &[(usize, usize)] {
        &self.lattice
    }

    pub fn lattice_index(&self, i: usize, j: usize) -> Option<usize> {
        let m = self.order;
        match self.family {
            Family::Line => (j == 0 && i <= m).then_some(i),
            Family::Quadrilateral => (i <= m && j <= m).then(|| j * (m + 1) + i),
            Family::Triangle => {
                if i + j > m {
                    return None;
                }
                // rows 0..j hold (m+1) + m + ... + (m+2-j) nodes
                let before: usize = (0..j).map(|jj| m + 1 - jj).sum();
                Some(before + i)
            }
        }
    }

    /// Local indices of the vertex nodes, counterclockwise.
    pub fn vertex_nodes(&self) -> Vec<usize> {
        let m = self.order;
        let idx = |i, j| self.lattice_index(i, j).expect("vertex in lattice");
        match self.family {
            Family::Line => vec![0, m],
            Family::Triangle => vec![idx(0, 0), idx(m, 0), idx(0, m)],
            Family::Quadrilateral => vec![idx(0, 0), idx(m, 0), idx(m, m), idx(0, m)],
        }
    }

    /// Local node indices of edge `e`, from vertex `e` to vertex `e + 1`,
    /// endpoints included.
    pub fn edge_nodes(&self, e: usize) -> Vec<usize> {
        let m = self.order;
        let idx = |i, j| self.lattice_index(i, j).expect("edge node in lattice");
        match (self.family, e) {
            (Family::Line, 0) => (0..=m).collect(),
            (Family::Triangle, 0) => (0..=m).map(|k| idx(k, 0)).collect(),
            (Family::Triangle, 1) => (0..=m).map(|k| idx(m - k, k)).collect(),
            (Family::Triangle, 2) => (0..=m).map(|k| idx(0, m - k)).collect(),
            (Family::Quadrilateral, 0) => (0..=m).map(|k| idx(k, 0)).collect(),
            (Family::Quadrilateral, 1) => (0..=m).map(|k| idx(m, k)).collect(),
            (Family::Quadrilateral, 2) => (0..=m).map(|k| idx(m - k, m)).collect(),
            (Family::Quadrilateral, 3) => (0..=m).map(|k| idx(0, m - k)).collect(),
            _ => panic!("edge {e} out of range for {}", self.family),
        }
    }

    /// Nodes not on the element boundary.
    pub fn interior_nodes(&self) -> Vec<usize> {
        let m = self.order;
        self.lattice
            .iter()
            .enumerate()
            .filter(|(_, &(i, j))| match self.family {
                Family::Line => i > 0 && i < m,
                Family::Triangle => i > 0 && j > 0 && i + j < m,
                Family::Quadrilateral => i > 0 && j > 0 && i < m && j < m,
            })
            .map(|(n, _)| n)
            .collect()
    }

    pub fn eval(&self, p: Point2<T>) -> ShapeValues<T> {
        let n = self.node_count();
        let mut sv = ShapeValues { values: vec![T::zero(); n], gradients: vec![[T::zero(); 2]; n] };
        self.eval_into(p, &mut sv);
        sv
    }

    /// Evaluates into preallocated buffers (resized when needed).
    pub fn eval_into(&self, p: Point2<T>, out: &mut ShapeValues<T>) {
        let n = self.node_count();
        out.values.resize(n, T::zero());
        out.gradients.resize(n, [T::zero(); 2]);
        let m = self.order;
        match self.family {
            Family::Line => {
                let mut d = vec![T::zero(); m + 1];
                lagrange::line_basis(m, p.x, &mut out.values, &mut d);
                for (g, dv) in out.gradients.iter_mut().zip(d) {
                    *g = [dv, T::zero()];
                }
            }
            Family::Triangle => {
                lagrange::triangle_basis(m, &self.lattice, p.x, p.y, &mut out.values, &mut out.gradients);
            }
            Family::Quadrilateral => {
                let mut va = [T::zero(); MAX_ORDER + 1];
                let mut da = [T::zero(); MAX_ORDER + 1];
                let mut vb = [T::zero(); MAX_ORDER + 1];
                let mut db = [T::zero(); MAX_ORDER + 1];
                lagrange::line_basis(m, p.x, &mut va[..=m], &mut da[..=m]);
                lagrange::line_basis(m, p.y, &mut vb[..=m], &mut db[..=m]);
                for (n, &(i, j)) in self.lattice.iter().enumerate() {
                    out.values[n] = va[i] * vb[j];
                    out.gradients[n] = [da[i] * vb[j], va[i] * db[j]];
                }
            }
        }
    }

    /// Shape values only.
    pub fn values(&self, p: Point2<T>) -> Vec<T> {
        self.eval(p).values
    }
}

/// One-shot shape function evaluation.
pub fn shape_eval<T: Real>(family: Family, order: usize, point: Point2<T>) -> Result<ShapeValues<T>, RefElemError> {
    Ok(ReferenceElement::new(family, order)?.eval(point))
}

/// Evaluation of the order-`m` Lagrange basis on [-1, 1] (interface elements).
pub fn line_shape<T: Real>(order: usize, u: T) -> (Vec<T>, Vec<T>) {
    let mut v = vec![T::zero(); order + 1];
    let mut d = vec![T::zero(); order + 1];
    lagrange::line_basis(order, u, &mut v, &mut d);
    (v, d)
}
