use super::{detect_cut, ElementField, LevelSetField, DEFAULT_GRID_SAMPLES};
use crate::reconstruct::{edge_root, ReconstructError};
use crate::{Point2, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Validity {
    Valid,
    /// Cut, but the boundary carries no crossing.
    InvalidInclusion,
    /// More than two boundary crossings, or more than two on one edge.
    InvalidMulticut,
    /// A single cut vertex with the element interior cut.
    NodeDoubleCut,
}

/// Roots on local edge `edge`, as parameters in [0, 1] from vertex `edge`
/// to vertex `edge + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeCut<T = f64> {
    pub edge: usize,
    pub roots: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CutReport<T = f64> {
    pub is_cut: bool,
    pub cut_edges: Vec<EdgeCut<T>>,
    /// Local vertex ids with a zero nodal value.
    pub cut_nodes: Vec<usize>,
    pub validity: Validity,
}

impl<T> CutReport<T> {
    /// Boundary crossings, cut vertices counted once.
    pub fn crossing_count(&self) -> usize {
        self.cut_edges.iter().map(|c| c.roots.len()).sum::<usize>() + self.cut_nodes.len()
    }
}

/// Sign brackets of a function sampled along a segment.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentScan<T = f64> {
    /// Parameter intervals holding a sign change.
    pub brackets: Vec<(T, T)>,
}

/// Samples `f` at `intervals + 1` equispaced parameters in `[t0, t1]` and
/// returns the intervals with a sign change. Endpoint values are taken from
/// `ends`; an endpoint equal to zero is a cut vertex and the interval next
/// to it is not reported. Interior samples that are exactly zero count as
/// positive.
pub fn scan_segment<T: Real>(
    f: impl Fn(T) -> T,
    t0: T,
    t1: T,
    ends: (T, T),
    intervals: usize,
) -> SegmentScan<T> {
    let n = intervals.max(1);
    let t_at = |k: usize| {
        if k == n {
            t1
        } else {
            t0 + (t1 - t0) * T::from_count(k) / T::from_count(n)
        }
    };
    let mut brackets = Vec::new();
    let mut prev = ends.0;
    for k in 1..=n {
        let v = if k == n { ends.1 } else { f(t_at(k)) };
        let zero_end = (k == 1 && prev == T::zero()) || (k == n && v == T::zero());
        let sign = |x: T| if x < T::zero() { -1 } else { 1 };
        if !zero_end && sign(prev) != sign(v) {
            brackets.push((t_at(k - 1), t_at(k)));
        }
        prev = v;
    }
    SegmentScan { brackets }
}

/// Crossing analysis of one element (all four or three edges).
pub fn classify_cut<T: Real>(ef: &ElementField<'_, T>, field: &LevelSetField<T>) -> Result<CutReport<T>, ReconstructError> {
    classify_with(ef, field.node_tol(), DEFAULT_GRID_SAMPLES)
}

pub(crate) fn classify_with<T: Real>(
    ef: &ElementField<'_, T>,
    node_tol: T,
    samples: usize,
) -> Result<CutReport<T>, ReconstructError> {
    let re = ef.re;
    let verts = re.vertex_nodes();
    let nv = verts.len();
    let rv: Vec<Point2<T>> = verts.iter().map(|&i| re.nodes()[i]).collect();
    let vval: Vec<T> = verts
        .iter()
        .map(|&i| if ef.values[i].abs() <= node_tol { T::zero() } else { ef.values[i] })
        .collect();
    let is_cut = detect_cut(ef, samples);
    let cut_nodes: Vec<usize> = (0..nv).filter(|&k| vval[k] == T::zero()).collect();
    let mut cut_edges = Vec::new();
    let mut multicut = false;
    let intervals = re.order() * (samples + 1);
    for e in 0..nv {
        let (a, b) = (rv[e], rv[(e + 1) % nv]);
        let f = |t: T| ef.value(a.lerp(b, t));
        let scan = scan_segment(f, T::zero(), T::one(), (vval[e], vval[(e + 1) % nv]), intervals);
        if scan.brackets.len() > 2 {
            multicut = true;
        }
        if scan.brackets.is_empty() {
            continue;
        }
        let mut roots = Vec::new();
        for &(lo, hi) in &scan.brackets {
            let (t, _) = edge_root(ef, a, b, (lo, hi))?;
            roots.push(t);
        }
        cut_edges.push(EdgeCut { edge: e, roots });
    }
    let report = CutReport { is_cut, cut_edges, cut_nodes, validity: Validity::Valid };
    let validity = validity_of(&report, multicut);
    Ok(CutReport { validity, ..report })
}

pub(crate) fn validity_of<T>(r: &CutReport<T>, multicut: bool) -> Validity {
    let n = r.crossing_count();
    if multicut || n > 2 {
        Validity::InvalidMulticut
    } else if n == 2 || !r.is_cut {
        Validity::Valid
    } else if n == 0 {
        Validity::InvalidInclusion
    } else if r.cut_nodes.len() == 1 {
        Validity::NodeDoubleCut
    } else {
        Validity::InvalidMulticut
    }
}

/// Number of sign changes of `f` over `n` equal intervals of `[0, 1]`.
#[doc(hidden)]
pub fn dense_sign_changes<T: Real>(f: impl Fn(T) -> T, n: usize) -> usize {
    let mut count = 0;
    let mut prev = f(T::zero());
    for k in 1..=n {
        let v = f(T::from_count(k) / T::from_count(n));
        if (prev < T::zero()) != (v < T::zero()) {
            count += 1;
        }
        prev = v;
    }
    count
}
