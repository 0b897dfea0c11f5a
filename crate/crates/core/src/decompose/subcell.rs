//! Subdivision templates for locally cut cells and the splits used by the
//! non-local and refinement passes.

use super::topology::{CutKind, TopologyCode};
use super::DecomposeError;
use crate::geometry::min_triangle_angle;
use crate::refelem::Family;
use crate::{Point2, Real};

/// Vertex of a template cell: a corner of the cut cell or one of the two
/// interface endpoints. `X` is the root on the template's first edge and
/// `Y` the root on its second edge; cut vertices appear as corners.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Vertex {
    Corner(usize),
    X,
    Y,
}

/// One cell of a template, counterclockwise. When `special` is set the
/// interface runs along edge 1 (`vertices[1] → vertices[2]`).
#[derive(Clone, Debug, PartialEq)]
pub struct TemplateCell {
    pub family: Family,
    pub vertices: Vec<Vertex>,
    pub special: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Template {
    pub cells: Vec<TemplateCell>,
    /// Local edges carrying `X` and `Y`.
    pub x_edge: Option<usize>,
    pub y_edge: Option<usize>,
    /// The two interface endpoints, in the order the interface is built.
    pub ends: [Vertex; 2],
}

/// Cell with `vertices` rotated so that edge `special` becomes edge 1.
fn special_cell(vertices: Vec<Vertex>, special: usize) -> TemplateCell {
    let n = vertices.len();
    let family = if n == 3 { Family::Triangle } else { Family::Quadrilateral };
    let vertices = (0..n).map(|k| vertices[(k + special + n - 1) % n]).collect();
    TemplateCell { family, vertices, special: true }
}

fn plain_cell(vertices: Vec<Vertex>) -> TemplateCell {
    let family = if vertices.len() == 3 { Family::Triangle } else { Family::Quadrilateral };
    TemplateCell { family, vertices, special: false }
}

/// Template for a local code. `pos` gives the reference position of each
/// vertex; it is only consulted to triangulate the pentagon left by a quad
/// cut across a corner.
pub fn template<T: Real>(code: &TopologyCode, pos: impl Fn(Vertex) -> Point2<T>) -> Result<Template, DecomposeError> {
    if !code.is_local() {
        return Err(DecomposeError::InvalidTopology(format!("{code} is not local")));
    }
    let n = code.family.vertex_count();
    let c = |k: usize| Vertex::Corner(k % n);
    use Vertex::{X, Y};
    let t = match (code.family, code.kind) {
        (Family::Triangle, CutKind::EdgeEdge(a, b)) => {
            let (i, j) = if (a + 1) % 3 == b { (a, b) } else { (b, a) };
            Template {
                cells: vec![special_cell(vec![X, c(i + 1), Y], 2), special_cell(vec![c(i), X, Y, c(i + 2)], 1)],
                x_edge: Some(i),
                y_edge: Some(j),
                ends: [X, Y],
            }
        }
        (Family::Triangle, CutKind::NodeEdge { node, edge: i }) => Template {
            cells: vec![special_cell(vec![c(i), X, c(node)], 1), special_cell(vec![X, c(i + 1), c(node)], 2)],
            x_edge: Some(i),
            y_edge: None,
            ends: [X, c(node)],
        },
        (Family::Quadrilateral, CutKind::EdgeEdge(a, b)) if (b - a) % 2 == 1 => {
            let (i, j) = if (a + 1) % 4 == b { (a, b) } else { (b, a) };
            let pent = [c(i), X, Y, c(i + 2), c(i + 3)];
            let p: Vec<Point2<T>> = pent.iter().map(|&v| pos(v)).collect();
            let mut best = (0, T::neg_infinity());
            for v in 0..5 {
                let q = min_fan_angle(&p, v);
                if q > best.1 {
                    best = (v, q);
                }
            }
            let mut cells = vec![special_cell(vec![X, c(i + 1), Y], 2)];
            let v = best.0;
            for k in 1..4 {
                let tri = [pent[v], pent[(v + k) % 5], pent[(v + k + 1) % 5]];
                match (0..3).find(|&e| tri[e] == X && tri[(e + 1) % 3] == Y) {
                    Some(e) => cells.push(special_cell(tri.to_vec(), e)),
                    None => cells.push(plain_cell(tri.to_vec())),
                }
            }
            Template { cells, x_edge: Some(i), y_edge: Some(j), ends: [X, Y] }
        }
        (Family::Quadrilateral, CutKind::EdgeEdge(i, j)) => Template {
            cells: vec![
                special_cell(vec![c(i), X, Y, c(i + 3)], 1),
                special_cell(vec![X, c(i + 1), c(i + 2), Y], 3),
            ],
            x_edge: Some(i),
            y_edge: Some(j),
            ends: [X, Y],
        },
        (Family::Quadrilateral, CutKind::NodeEdge { node, edge: i }) => {
            let cells = if node == (i + 2) % 4 {
                vec![special_cell(vec![X, c(i + 1), c(node)], 2), special_cell(vec![c(i), X, c(node), c(i + 3)], 1)]
            } else {
                vec![special_cell(vec![c(i), X, c(node)], 1), special_cell(vec![X, c(i + 1), c(i + 2), c(node)], 3)]
            };
            Template { cells, x_edge: Some(i), y_edge: None, ends: [X, c(node)] }
        }
        (Family::Quadrilateral, CutKind::NodeNode(i, j)) => Template {
            cells: vec![special_cell(vec![c(i), c(i + 1), c(j)], 2), special_cell(vec![c(j), c(j + 1), c(i)], 2)],
            x_edge: None,
            y_edge: None,
            ends: [c(i), c(j)],
        },
        _ => return Err(DecomposeError::InvalidTopology(format!("no template for {code}"))),
    };
    Ok(t)
}

fn min_fan_angle<T: Real>(p: &[Point2<T>], v: usize) -> T {
    (1..4)
        .map(|k| min_triangle_angle(p[v], p[(v + k) % 5], p[(v + k + 1) % 5]))
        .fold(T::infinity(), T::min)
}

/// Straight sub-cell of a cut cell, in the parent's reference coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct SubCell<T = f64> {
    pub family: Family,
    pub corners: Vec<Point2<T>>,
    pub vertices: Vec<Vertex>,
    /// Edge 1 carries the interface.
    pub special: bool,
}

impl<T: Real> SubCell<T> {
    /// Corners on the interface chord.
    pub fn interface_corners(&self) -> Option<[Point2<T>; 2]> {
        self.special.then(|| [self.corners[1], self.corners[2]])
    }
}

/// Sub-cells of a locally cut cell with `corners`, given the positions of
/// the roots `x` (on the template's first edge) and `y`.
pub fn local_subdivide<T: Real>(
    corners: &[Point2<T>],
    code: &TopologyCode,
    x: Point2<T>,
    y: Point2<T>,
) -> Result<Vec<SubCell<T>>, DecomposeError> {
    let pos = |v: Vertex| match v {
        Vertex::Corner(k) => corners[k],
        Vertex::X => x,
        Vertex::Y => y,
    };
    let t = template(code, pos)?;
    Ok(t.cells
        .into_iter()
        .map(|c| SubCell {
            family: c.family,
            corners: c.vertices.iter().map(|&v| pos(v)).collect(),
            vertices: c.vertices,
            special: c.special,
        })
        .collect())
}

/// Splits a cell at a point on its edge `edge`: a triangle into two
/// triangles, a quadrilateral into three triangles sharing the point.
/// Returns corner lists with `None` standing for the new point.
pub fn split_at_edge_point(family: Family, edge: usize) -> Vec<Vec<Option<usize>>> {
    let n = family.vertex_count();
    let c = |k: usize| Some((edge + k) % n);
    match family {
        Family::Triangle => vec![vec![c(0), None, c(2)], vec![None, c(1), c(2)]],
        _ => vec![vec![None, c(1), c(2)], vec![None, c(2), c(3)], vec![None, c(3), c(0)]],
    }
}

/// Uniform refinement: corner lists over the cell's corners (`Corner`),
/// edge midpoints (`Mid(e)`) and, for quadrilaterals, the center.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RefinePoint {
    Corner(usize),
    Mid(usize),
    Center,
}

pub fn refinement_children(family: Family) -> Vec<Vec<RefinePoint>> {
    use RefinePoint::{Center, Corner as C, Mid as M};
    match family {
        Family::Triangle => vec![
            vec![C(0), M(0), M(2)],
            vec![M(0), C(1), M(1)],
            vec![M(2), M(1), C(2)],
            vec![M(0), M(1), M(2)],
        ],
        _ => vec![
            vec![C(0), M(0), Center, M(3)],
            vec![M(0), C(1), M(1), Center],
            vec![Center, M(1), C(2), M(2)],
            vec![M(3), Center, M(2), C(3)],
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::polygon_area;

    fn tri() -> Vec<Point2<f64>> {
        vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)]
    }

    fn quad() -> Vec<Point2<f64>> {
        vec![Point2::new(-1.0, -1.0), Point2::new(1.0, -1.0), Point2::new(1.0, 1.0), Point2::new(-1.0, 1.0)]
    }

    fn check_tiling(corners: &[Point2<f64>], cells: &[SubCell<f64>]) {
        let total: f64 = cells.iter().map(|c| polygon_area(&c.corners)).sum();
        assert!((total - polygon_area(corners)).abs() < 1e-14);
        for c in cells {
            assert!(polygon_area(&c.corners) > 0.0, "{c:?}");
        }
    }

    #[test]
    fn triangle_two_edges_gives_triangle_and_quad() {
        let code: TopologyCode = "T_13".parse().unwrap();
        let x = Point2::new(0.0, 0.4); // on edge 3 (c2 -> c0)
        let y = Point2::new(0.3, 0.0); // on edge 1
        let t = template(&code, |_| Point2::<f64>::zero()).unwrap();
        assert_eq!((t.x_edge, t.y_edge), (Some(2), Some(0)));
        let cells = local_subdivide(&tri(), &code, x, y).unwrap();
        let fams: Vec<Family> = cells.iter().map(|c| c.family).collect();
        assert_eq!(fams, vec![Family::Triangle, Family::Quadrilateral]);
        check_tiling(&tri(), &cells);
        for c in &cells {
            let [a, b] = c.interface_corners().unwrap();
            assert!((a == x && b == y) || (a == y && b == x));
        }
    }

    #[test]
    fn triangle_node_edge() {
        let code: TopologyCode = "T_2^1".parse().unwrap();
        let x = Point2::new(0.5, 0.5);
        let cells = local_subdivide(&tri(), &code, x, x).unwrap();
        assert_eq!(cells.len(), 2);
        check_tiling(&tri(), &cells);
    }

    #[test]
    fn quad_adjacent_edges_four_triangles() {
        let code: TopologyCode = "Q_14".parse().unwrap();
        // edges 3 (c3 -> c0, x = -1) and 0 (c0 -> c1, y = -1) cut near c0
        let x = Point2::new(-1.0, -0.2);
        let y = Point2::new(-0.4, -1.0);
        let t = template(&code, |_| Point2::<f64>::zero()).unwrap();
        assert_eq!((t.x_edge, t.y_edge), (Some(3), Some(0)));
        let cells = local_subdivide(&quad(), &code, x, y).unwrap();
        assert_eq!(cells.len(), 4);
        assert!(cells.iter().all(|c| c.family == Family::Triangle));
        assert_eq!(cells.iter().filter(|c| c.special).count(), 2);
        check_tiling(&quad(), &cells);
        // one triangle on the corner side, three on the other
        let corner_side = cells.iter().filter(|c| c.vertices.contains(&Vertex::Corner(0))).count();
        assert_eq!(corner_side, 1);
    }

    #[test]
    fn quad_opposite_edges_two_quads() {
        let code: TopologyCode = "Q_24".parse().unwrap();
        let cells = local_subdivide(&quad(), &code, Point2::new(1.0, 0.1), Point2::new(-1.0, -0.2)).unwrap();
        assert_eq!(cells.len(), 2);
        assert!(cells.iter().all(|c| c.family == Family::Quadrilateral && c.special));
        check_tiling(&quad(), &cells);
    }

    #[test]
    fn quad_node_cases() {
        for s in ["Q_1^3", "Q_1^4", "Q_2^4", "Q_3^1", "Q_4^2"] {
            let code: TopologyCode = s.parse().unwrap();
            let t = template(&code, |_| Point2::<f64>::zero()).unwrap();
            let e = t.x_edge.unwrap();
            let x = quad()[e].lerp(quad()[(e + 1) % 4], 0.3);
            let cells = local_subdivide(&quad(), &code, x, x).unwrap();
            assert_eq!(cells.len(), 2, "{s}");
            check_tiling(&quad(), &cells);
        }
        let code: TopologyCode = "Q^13".parse().unwrap();
        let cells = local_subdivide(&quad(), &code, Point2::zero(), Point2::zero()).unwrap();
        assert_eq!(cells.len(), 2);
        check_tiling(&quad(), &cells);
    }

    #[test]
    fn nonlocal_codes_have_no_template() {
        let code: TopologyCode = "Q_22".parse().unwrap();
        assert!(template(&code, |_| Point2::<f64>::zero()).is_err());
    }

    #[test]
    fn splits_keep_orientation() {
        for family in [Family::Triangle, Family::Quadrilateral] {
            let corners = if family == Family::Triangle { tri() } else { quad() };
            let n = corners.len();
            for edge in 0..n {
                let p = corners[edge].lerp(corners[(edge + 1) % n], 0.4);
                let kids: Vec<Vec<Point2<f64>>> = split_at_edge_point(family, edge)
                    .iter()
                    .map(|k| k.iter().map(|c| c.map_or(p, |i| corners[i])).collect())
                    .collect();
                let total: f64 = kids.iter().map(|k| polygon_area(k)).sum();
                assert!((total - polygon_area(&corners)).abs() < 1e-14);
                assert!(kids.iter().all(|k| polygon_area(k) > 0.0));
            }
        }
    }
}
