use std::collections::HashMap;

use super::{BackgroundMesh, Element, MeshError};
use crate::refelem::ReferenceElement;
use crate::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EdgeIncidence {
    pub element: usize,
    pub local_edge: usize,
    /// True when the local edge runs from the higher to the lower vertex id.
    pub reversed: bool,
}

/// An undirected mesh edge. `nodes` runs from `vertices.0` to `vertices.1`
/// and `vertices.0 < vertices.1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MeshEdge {
    pub vertices: (usize, usize),
    pub nodes: Vec<usize>,
    pub incidences: Vec<EdgeIncidence>,
}

impl MeshEdge {
    pub fn is_boundary(&self) -> bool {
        self.incidences.len() == 1
    }
}

#[derive(Clone, Debug, Default)]
pub struct EdgeAdjacency {
    pub edges: Vec<MeshEdge>,
    by_vertices: HashMap<(usize, usize), usize>,
    /// Global edge id of every local edge, per element.
    pub element_edges: Vec<Vec<usize>>,
}

impl EdgeAdjacency {
    pub fn find(&self, a: usize, b: usize) -> Option<usize> {
        self.by_vertices.get(&(a.min(b), a.max(b))).copied()
    }

    pub fn interior_count(&self) -> usize {
        self.edges.iter().filter(|e| e.incidences.len() == 2).count()
    }

    pub fn boundary_count(&self) -> usize {
        self.edges.iter().filter(|e| e.is_boundary()).count()
    }

    /// The element across edge `edge` from `element`, if any.
    pub fn neighbor(&self, edge: usize, element: usize) -> Option<EdgeIncidence> {
        self.edges[edge].incidences.iter().copied().find(|i| i.element != element)
    }
}

/// Recomputes the adjacency of `mesh`.
pub fn edge_adjacency<T: Real>(mesh: &BackgroundMesh<T>) -> Result<EdgeAdjacency, MeshError> {
    build(&mesh.elements)
}

pub(super) fn build(elements: &[Element]) -> Result<EdgeAdjacency, MeshError> {
    let mut adj = EdgeAdjacency::default();
    let mut refs: Vec<ReferenceElement<f64>> = Vec::new();
    for (k, el) in elements.iter().enumerate() {
        let re = match refs.iter().position(|r| r.family() == el.family && r.order() == el.order) {
            Some(i) => &refs[i],
            None => {
                refs.push(ReferenceElement::new(el.family, el.order)?);
                refs.last().expect("just pushed")
            }
        };
        let mut ids = Vec::with_capacity(el.family.edge_count());
        for le in 0..el.family.edge_count() {
            let mut seq: Vec<usize> = re.edge_nodes(le).iter().map(|&i| el.nodes[i]).collect();
            let (a, b) = (seq[0], *seq.last().expect("edge has nodes"));
            let reversed = a > b;
            if reversed {
                seq.reverse();
            }
            let key = (a.min(b), a.max(b));
            let inc = EdgeIncidence { element: k, local_edge: le, reversed };
            let id = match adj.by_vertices.get(&key) {
                Some(&id) => {
                    let e = &mut adj.edges[id];
                    if e.nodes != seq {
                        return Err(MeshError::HangingNodes(key.0, key.1));
                    }
                    if e.incidences.len() == 2 {
                        return Err(MeshError::NonManifold(key.0, key.1));
                    }
                    e.incidences.push(inc);
                    id
                }
                None => {
                    adj.edges.push(MeshEdge { vertices: key, nodes: seq, incidences: vec![inc] });
                    adj.by_vertices.insert(key, adj.edges.len() - 1);
                    adj.edges.len() - 1
                }
            };
            ids.push(id);
        }
        adj.element_edges.push(ids);
    }
    Ok(adj)
}
