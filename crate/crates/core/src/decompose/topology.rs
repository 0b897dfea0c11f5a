use std::fmt;
use std::str::FromStr;

use super::DecomposeError;
use crate::levelset::{CutReport, Validity};
use crate::refelem::Family;

/// Which boundary entities carry the two interface crossings. Indices are
/// zero-based local edge / vertex ids; the textual form is one-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CutKind {
    /// Roots on edges `i <= j` (`i == j`: one edge cut twice).
    EdgeEdge(usize, usize),
    /// Vertex `node` and a root on `edge`.
    NodeEdge { node: usize, edge: usize },
    /// Vertices `i < j`.
    NodeNode(usize, usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TopologyCode {
    pub family: Family,
    pub kind: CutKind,
}

impl TopologyCode {
    /// Normalizes the index order.
    pub fn new(family: Family, kind: CutKind) -> Result<Self, DecomposeError> {
        let n = family.vertex_count();
        let kind = match kind {
            CutKind::EdgeEdge(i, j) => CutKind::EdgeEdge(i.min(j), i.max(j)),
            CutKind::NodeNode(i, j) if i == j => {
                return Err(DecomposeError::InvalidTopology(format!("vertex {} cut twice", i + 1)))
            }
            CutKind::NodeNode(i, j) => CutKind::NodeNode(i.min(j), i.max(j)),
            k => k,
        };
        let max = match kind {
            CutKind::EdgeEdge(i, j) | CutKind::NodeNode(i, j) => i.max(j),
            CutKind::NodeEdge { node, edge } => node.max(edge),
        };
        if n < 3 || max >= n {
            return Err(DecomposeError::InvalidTopology(format!("index {} out of range for a {family}", max + 1)));
        }
        Ok(Self { family, kind })
    }

    /// Whether the split can be done inside the element alone.
    pub fn is_local(&self) -> bool {
        let n = self.family.vertex_count();
        let adjacent = |a: usize, b: usize| (a + 1) % n == b || (b + 1) % n == a;
        match self.kind {
            CutKind::EdgeEdge(i, j) => i != j,
            CutKind::NodeEdge { node, edge } => node != edge && node != (edge + 1) % n,
            CutKind::NodeNode(i, j) => !adjacent(i, j),
        }
    }
}

impl fmt::Display for TopologyCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = match self.family {
            Family::Triangle => "T",
            Family::Quadrilateral => "Q",
            Family::Line => "L",
        };
        match self.kind {
            CutKind::EdgeEdge(i, j) => write!(f, "{p}_{}{}", i + 1, j + 1),
            CutKind::NodeEdge { node, edge } => write!(f, "{p}_{}^{}", edge + 1, node + 1),
            CutKind::NodeNode(i, j) => write!(f, "{p}^{}{}", i + 1, j + 1),
        }
    }
}

impl FromStr for TopologyCode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("malformed topology code `{s}`");
        let mut chars = s.chars();
        let family = match chars.next() {
            Some('T') => Family::Triangle,
            Some('Q') => Family::Quadrilateral,
            _ => return Err(bad()),
        };
        let rest: &str = chars.as_str();
        let digit = |c: char| c.to_digit(10).filter(|d| *d >= 1).map(|d| d as usize - 1).ok_or_else(bad);
        let d: Vec<char> = rest.chars().collect();
        let kind = match d.as_slice() {
            ['_', a, b] => CutKind::EdgeEdge(digit(*a)?, digit(*b)?),
            ['_', e, '^', v] => CutKind::NodeEdge { node: digit(*v)?, edge: digit(*e)? },
            ['^', a, b] => CutKind::NodeNode(digit(*a)?, digit(*b)?),
            _ => return Err(bad()),
        };
        TopologyCode::new(family, kind).map_err(|e| e.to_string())
    }
}

/// Topology of a valid two-crossing cut.
pub fn classify_topology<T>(family: Family, report: &CutReport<T>) -> Result<TopologyCode, DecomposeError> {
    if report.validity == Validity::NodeDoubleCut {
        return Err(DecomposeError::InvalidTopology("one vertex cut twice".into()));
    }
    if report.validity != Validity::Valid || report.crossing_count() != 2 {
        return Err(DecomposeError::InvalidTopology(format!(
            "{:?} cut with {} crossings",
            report.validity,
            report.crossing_count()
        )));
    }
    let edges: Vec<usize> = report.cut_edges.iter().flat_map(|c| c.roots.iter().map(move |_| c.edge)).collect();
    let kind = match (report.cut_nodes.as_slice(), edges.as_slice()) {
        ([], [a, b]) => CutKind::EdgeEdge(*a, *b),
        ([v], [e]) => CutKind::NodeEdge { node: *v, edge: *e },
        ([a, b], []) => CutKind::NodeNode(*a, *b),
        _ => unreachable!("two crossings"),
    };
    TopologyCode::new(family, kind)
}
