//! Legacy ASCII VTK export with Lagrange cells.

use std::io::Write;

use super::{ConformingMesh, MeshError};
use crate::refelem::{Family, ReferenceElement};
use crate::{Point2, Real};

const VTK_LAGRANGE_CURVE: u8 = 68;
const VTK_LAGRANGE_TRIANGLE: u8 = 69;
const VTK_LAGRANGE_QUADRILATERAL: u8 = 70;

/// One cell to export: family, order and local-order node ids.
pub struct VtkCell<'a> {
    pub family: Family,
    pub order: usize,
    pub nodes: &'a [usize],
}

pub enum Data<'a, T> {
    Scalar(&'a str, &'a [T]),
    Vector(&'a str, &'a [[T; 2]]),
    Int(&'a str, &'a [i64]),
}

/// Permutation from VTK Lagrange ordering to the local lattice ordering:
/// entry `k` is the local index of the `k`-th VTK point.
pub fn vtk_permutation(family: Family, order: usize) -> Result<Vec<usize>, MeshError> {
    let re = ReferenceElement::<f64>::new(family, order)?;
    let m = order;
    let idx = |i, j| re.lattice_index(i, j).expect("lattice node");
    Ok(match family {
        Family::Line => {
            let mut v = vec![0, m];
            v.extend(1..m);
            v
        }
        Family::Quadrilateral => {
            let mut v = vec![idx(0, 0), idx(m, 0), idx(m, m), idx(0, m)];
            v.extend((1..m).map(|i| idx(i, 0)));
            v.extend((1..m).map(|j| idx(m, j)));
            v.extend((1..m).map(|i| idx(i, m)));
            v.extend((1..m).map(|j| idx(0, j)));
            for j in 1..m {
                v.extend((1..m).map(|i| idx(i, j)));
            }
            v
        }
        Family::Triangle => {
            let mut v = Vec::with_capacity(re.node_count());
            triangle_recursive(m, 0, &mut v, &idx);
            v
        }
    })
}

/// Vertices, edges (counterclockwise) and then the interior as a triangle
/// of order `n - 3`, recursively. `off` is the lattice offset of the
/// sub-triangle.
fn triangle_recursive(n: usize, off: usize, out: &mut Vec<usize>, idx: &dyn Fn(usize, usize) -> usize) {
    if n == 0 {
        out.push(idx(off, off));
        return;
    }
    out.extend([idx(off, off), idx(off + n, off), idx(off, off + n)]);
    out.extend((1..n).map(|k| idx(off + k, off)));
    out.extend((1..n).map(|k| idx(off + n - k, off + k)));
    out.extend((1..n).map(|k| idx(off, off + n - k)));
    if n >= 3 {
        triangle_recursive(n - 3, off + 1, out, idx);
    }
}

fn cell_type(f: Family) -> u8 {
    match f {
        Family::Line => VTK_LAGRANGE_CURVE,
        Family::Triangle => VTK_LAGRANGE_TRIANGLE,
        Family::Quadrilateral => VTK_LAGRANGE_QUADRILATERAL,
    }
}

pub fn write_vtk<T: Real, W: Write>(
    mut w: W,
    title: &str,
    nodes: &[Point2<T>],
    cells: &[VtkCell<'_>],
    point_data: &[Data<'_, T>],
    cell_data: &[Data<'_, T>],
) -> Result<(), MeshError> {
    let io = |e: std::io::Error| MeshError::Parameter(format!("vtk write failed: {e}"));
    writeln!(w, "# vtk DataFile Version 5.1\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID").map_err(io)?;
    writeln!(w, "POINTS {} double", nodes.len()).map_err(io)?;
    for p in nodes {
        writeln!(w, "{:.16e} {:.16e} 0", p.x, p.y).map_err(io)?;
    }
    let total: usize = cells.iter().map(|c| c.nodes.len()).sum();
    writeln!(w, "CELLS {} {}", cells.len() + 1, total).map_err(io)?;
    writeln!(w, "OFFSETS vtktypeint64").map_err(io)?;
    let mut off = 0;
    write!(w, "0").map_err(io)?;
    for c in cells {
        off += c.nodes.len();
        write!(w, " {off}").map_err(io)?;
    }
    writeln!(w, "\nCONNECTIVITY vtktypeint64").map_err(io)?;
    let mut perms: Vec<((Family, usize), Vec<usize>)> = Vec::new();
    for c in cells {
        let key = (c.family, c.order);
        let perm = match perms.iter().position(|(k, _)| *k == key) {
            Some(i) => &perms[i].1,
            None => {
                perms.push((key, vtk_permutation(c.family, c.order)?));
                &perms.last().expect("just pushed").1
            }
        };
        let line: Vec<String> = perm.iter().map(|&l| c.nodes[l].to_string()).collect();
        writeln!(w, "{}", line.join(" ")).map_err(io)?;
    }
    writeln!(w, "CELL_TYPES {}", cells.len()).map_err(io)?;
    for c in cells {
        writeln!(w, "{}", cell_type(c.family)).map_err(io)?;
    }
    write_data(&mut w, "POINT_DATA", nodes.len(), point_data).map_err(io)?;
    write_data(&mut w, "CELL_DATA", cells.len(), cell_data).map_err(io)?;
    Ok(())
}

fn write_data<T: Real, W: Write>(w: &mut W, kind: &str, n: usize, data: &[Data<'_, T>]) -> std::io::Result<()> {
    if data.is_empty() {
        return Ok(());
    }
    writeln!(w, "{kind} {n}")?;
    for d in data {
        match d {
            Data::Scalar(name, v) => {
                writeln!(w, "SCALARS {name} double 1\nLOOKUP_TABLE default")?;
                for x in v.iter() {
                    writeln!(w, "{x:.16e}")?;
                }
            }
            Data::Vector(name, v) => {
                writeln!(w, "VECTORS {name} double")?;
                for x in v.iter() {
                    writeln!(w, "{:.16e} {:.16e} 0", x[0], x[1])?;
                }
            }
            Data::Int(name, v) => {
                writeln!(w, "SCALARS {name} long 1\nLOOKUP_TABLE default")?;
                for x in v.iter() {
                    writeln!(w, "{x}")?;
                }
            }
        }
    }
    Ok(())
}

/// Writes the 2D elements of a conforming mesh with `side` and `parent`
/// cell data (side: -1 minus, +1 plus).
pub fn write_conforming<T: Real, W: Write>(
    w: W,
    mesh: &ConformingMesh<T>,
    point_data: &[Data<'_, T>],
) -> Result<(), MeshError> {
    let cells: Vec<VtkCell<'_>> = mesh
        .elements
        .iter()
        .map(|e| VtkCell { family: e.family, order: e.order, nodes: &e.nodes })
        .collect();
    let side: Vec<i64> = mesh.elements.iter().map(|e| if e.side == super::Side::Minus { -1 } else { 1 }).collect();
    let parent: Vec<i64> = mesh.elements.iter().map(|e| e.parent as i64).collect();
    write_vtk(w, "conforming mesh", &mesh.nodes, &cells, point_data, &[Data::Int("side", &side), Data::Int("parent", &parent)])
}

/// Writes the interface facets of a conforming mesh as Lagrange curves.
pub fn write_facets<T: Real, W: Write>(w: W, mesh: &ConformingMesh<T>) -> Result<(), MeshError> {
    let cells: Vec<VtkCell<'_>> = mesh
        .facets
        .iter()
        .map(|f| VtkCell { family: Family::Line, order: f.order, nodes: &f.nodes })
        .collect();
    let parent: Vec<i64> = mesh.facets.iter().map(|f| f.parent as i64).collect();
    write_vtk(w, "interface facets", &mesh.nodes, &cells, &[], &[Data::Int("parent", &parent)])
}
