use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use super::RefCache;
use crate::decompose::{PsiVariant, TopologyCode};
use crate::refelem::{isoparametric_map, quadrature, Family, RefElemError};
use crate::{BoundingBox, Point2, Real};

/// Side of the interface, by the sign of the level set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Minus,
    Plus,
}

impl Side {
    pub fn of<T: Real>(phi: T) -> Self {
        if phi < T::zero() {
            Side::Minus
        } else {
            Side::Plus
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Side::Minus => Side::Plus,
            Side::Plus => Side::Minus,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Minus => "minus",
            Side::Plus => "plus",
        })
    }
}

impl FromStr for Side {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "minus" | "-" => Ok(Side::Minus),
            "plus" | "+" => Ok(Side::Plus),
            _ => Err(format!("unknown side `{s}`")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ConformingElement<T = f64> {
    pub family: Family,
    pub order: usize,
    pub nodes: Vec<usize>,
    pub side: Side,
    pub parent: usize,
    pub parent_family: Family,
    /// `None` for background elements copied unchanged.
    pub topology: Option<TopologyCode>,
    pub psi: Option<PsiVariant>,
    /// Node positions in the parent's reference coordinates.
    pub r_nodes: Vec<Point2<T>>,
}

impl<T> ConformingElement<T> {
    pub fn is_original(&self) -> bool {
        self.topology.is_none() && self.psi.is_none()
    }
}

/// Higher-order line element on the interface.
#[derive(Clone, Debug)]
pub struct InterfaceFacet<T = f64> {
    pub order: usize,
    pub parent: usize,
    pub nodes: Vec<usize>,
    pub r_nodes: Vec<Point2<T>>,
}

#[derive(Clone, Debug, Default)]
pub struct ConformingMesh<T = f64> {
    pub nodes: Vec<Point2<T>>,
    pub elements: Vec<ConformingElement<T>>,
    pub facets: Vec<InterfaceFacet<T>>,
    pub domain: Option<BoundingBox<T>>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConformityReport {
    /// Largest distance between corresponding nodes of a shared edge.
    pub max_edge_mismatch: f64,
    /// Edges with a single incident element that are not on the domain box.
    pub open_edges: usize,
    /// Edges shared by more than two elements.
    pub overloaded_edges: usize,
}

impl ConformityReport {
    pub fn is_conforming(&self, tol: f64) -> bool {
        self.max_edge_mismatch <= tol && self.open_edges == 0 && self.overloaded_edges == 0
    }
}

impl<T: Real> ConformingMesh<T> {
    pub fn element_coords(&self, e: usize) -> Vec<Point2<T>> {
        self.elements[e].nodes.iter().map(|&n| self.nodes[n]).collect()
    }

    pub fn facet_coords(&self, f: usize) -> Vec<Point2<T>> {
        self.facets[f].nodes.iter().map(|&n| self.nodes[n]).collect()
    }

    pub fn count_side(&self, side: Side) -> usize {
        self.elements.iter().filter(|e| e.side == side).count()
    }

    /// Largest relative deviation, over parents, between the summed
    /// reference-space areas of the sub-elements and the parent's area.
    pub fn max_tiling_error(&self) -> Result<f64, RefElemError> {
        let mut cache = RefCache::<T>::default();
        let mut sums: HashMap<usize, (Family, f64)> = HashMap::new();
        for el in &self.elements {
            let re = cache.get(el.family, el.order)?;
            let q = quadrature::<T>(el.family, 2 * el.order)?;
            let mut a = T::zero();
            for (p, w) in q.iter() {
                a += w * isoparametric_map(re, &el.r_nodes, p).det;
            }
            let entry = sums.entry(el.parent).or_insert((el.parent_family, 0.0));
            entry.1 += a.to_f64_lossy();
        }
        Ok(sums
            .values()
            .map(|(fam, s)| ((s - fam.measure()) / fam.measure()).abs())
            .fold(0.0, f64::max))
    }

    /// Smallest physical Jacobian over the assembly quadrature points
    /// (degree `2m + 2`), with the element attaining it.
    pub fn min_jacobian(&self) -> Result<Option<(usize, T)>, RefElemError> {
        let mut cache = RefCache::<T>::default();
        let mut worst: Option<(usize, T)> = None;
        for (k, el) in self.elements.iter().enumerate() {
            let re = cache.get(el.family, el.order)?;
            let q = quadrature::<T>(el.family, 2 * el.order + 2)?;
            let coords = self.element_coords(k);
            for &p in &q.points {
                let d = isoparametric_map(re, &coords, p).det;
                if worst.is_none_or(|(_, w)| d < w) {
                    worst = Some((k, d));
                }
            }
        }
        Ok(worst)
    }

    /// Edge matching between elements. Edges are matched by their vertex
    /// node ids; the node sequences of matched edges are compared by
    /// coordinates, and unmatched edges must lie on the domain box.
    pub fn conformity(&self) -> Result<ConformityReport, RefElemError> {
        let mut cache = RefCache::<T>::default();
        let mut edges: HashMap<(usize, usize), Vec<Vec<usize>>> = HashMap::new();
        for el in &self.elements {
            let re = cache.get(el.family, el.order)?;
            for e in 0..el.family.edge_count() {
                let mut seq: Vec<usize> = re.edge_nodes(e).iter().map(|&i| el.nodes[i]).collect();
                if seq[0] > *seq.last().expect("edge nodes") {
                    seq.reverse();
                }
                let key = (seq[0], *seq.last().expect("edge nodes"));
                edges.entry(key).or_default().push(seq);
            }
        }
        let mut report = ConformityReport::default();
        let scale = self
            .domain
            .map(|d| d.width().max(d.height()))
            .unwrap_or_else(T::one);
        let on_box = |p: Point2<T>| {
            self.domain.is_some_and(|d| d.on_boundary(p, T::tol(1e-12) * scale))
        };
        for seqs in edges.values() {
            match seqs.len() {
                1 => {
                    if !seqs[0].iter().all(|&n| on_box(self.nodes[n])) {
                        report.open_edges += 1;
                    }
                }
                2 => {
                    for (&a, &b) in seqs[0].iter().zip(&seqs[1]) {
                        let d = self.nodes[a].distance(self.nodes[b]).to_f64_lossy();
                        report.max_edge_mismatch = report.max_edge_mismatch.max(d);
                    }
                    if seqs[0].len() != seqs[1].len() {
                        report.max_edge_mismatch = f64::INFINITY;
                    }
                }
                _ => report.overloaded_edges += 1,
            }
        }
        Ok(report)
    }

    /// Keeps only elements on `side`, dropping nodes no longer referenced.
    /// Facets are kept. Returns the map from old to new node ids.
    pub fn retain_side(&mut self, side: Side) -> Vec<Option<usize>> {
        self.elements.retain(|e| e.side == side);
        let mut used = vec![false; self.nodes.len()];
        for el in &self.elements {
            for &n in &el.nodes {
                used[n] = true;
            }
        }
        for f in &self.facets {
            for &n in &f.nodes {
                used[n] = true;
            }
        }
        let mut map = vec![None; self.nodes.len()];
        let mut nodes = Vec::new();
        for (i, &u) in used.iter().enumerate() {
            if u {
                map[i] = Some(nodes.len());
                nodes.push(self.nodes[i]);
            }
        }
        for el in &mut self.elements {
            for n in &mut el.nodes {
                *n = map[*n].expect("retained node");
            }
        }
        for f in &mut self.facets {
            for n in &mut f.nodes {
                *n = map[*n].expect("retained node");
            }
        }
        self.nodes = nodes;
        map
    }
}
