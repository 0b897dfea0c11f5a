//! Mesh-level decomposition: cells in the parents' reference frames,
//! compatible splitting across neighbors and the final node registry.
//!
//! Every point that can be shared between cells has a canonical key. Points
//! on background edges are stored by their parameter along the edge
//! (measured from the lower vertex id), so both incident elements compute
//! identical roots and split points; points inside a background element are
//! stored by their reference coordinates.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;

use super::psi::{map_subcell_nodes, PsiVariant};
use super::subcell::{refinement_children, split_at_edge_point, template, RefinePoint, Vertex};
use super::topology::{classify_topology, CutKind, TopologyCode};
use super::{element_min_jacobian, jacobian_tolerance, DecomposeError, DecomposeOptions};
use crate::levelset::{detect_cut, scan_segment, validity_of, CutReport, EdgeCut, ElementField, LevelSetField, Validity};
use crate::mesh::{BackgroundMesh, ConformingElement, ConformingMesh, InterfaceFacet, Side};
use crate::reconstruct::{reconstruct_between, solve_bracketed, Endpoint, EndpointKind};
use crate::refelem::{isoparametric_map, line_map, line_shape, Family, ReferenceElement};
use crate::{Point2, Real};

const MAX_PASSES: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum PointKey {
    Bg(usize),
    Edge { edge: usize, t: u64 },
    Interior { parent: usize, x: u64, y: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct SegKey(PointKey, PointKey);

impl SegKey {
    fn new(a: PointKey, b: PointKey) -> Self {
        if a <= b {
            SegKey(a, b)
        } else {
            SegKey(b, a)
        }
    }
}

fn bits<T: Real>(v: T) -> u64 {
    let f = v.to_f64_lossy();
    if f == 0.0 {
        0.0f64.to_bits()
    } else {
        f.to_bits()
    }
}

fn unbits<T: Real>(b: u64) -> T {
    T::lit(f64::from_bits(b))
}

/// Straight segment between two keys, parametrized from the smaller key.
#[derive(Clone, Copy, Debug)]
enum SegGeom<T> {
    /// Part of background edge `edge`, from parameter `t0` to `t1`.
    Bg { edge: usize, t0: T, t1: T },
    Interior { r0: Point2<T>, r1: Point2<T> },
}

impl<T: Real> SegGeom<T> {
    fn span(&self) -> (T, T) {
        match *self {
            SegGeom::Bg { t0, t1, .. } => (t0, t1),
            SegGeom::Interior { .. } => (T::zero(), T::one()),
        }
    }
}

struct Parent<'a, T> {
    ef: ElementField<'a, T>,
    coords: Vec<Point2<T>>,
    verts: Vec<usize>,
    rv: Vec<Point2<T>>,
    edges: Vec<usize>,
}

/// Read-only data shared by the parallel cell passes.
struct Ctx<'a, T> {
    mesh: &'a BackgroundMesh<T>,
    values: &'a [T],
    node_tol: T,
    root_tol: (T, T),
    parents: Vec<Parent<'a, T>>,
    refs: &'a [ReferenceElement<T>; 2],
    opts: &'a DecomposeOptions,
    order: usize,
    iface_order: usize,
    intervals: usize,
}

#[derive(Clone, Debug)]
struct FinalSub<T> {
    family: Family,
    corners: Vec<PointKey>,
    special: bool,
    r_nodes: Vec<Point2<T>>,
    x_nodes: Vec<Point2<T>>,
    side: Side,
}

#[derive(Clone, Debug)]
struct FinalCell<T> {
    code: TopologyCode,
    ends: [PointKey; 2],
    iface_r: Vec<Point2<T>>,
    subs: Vec<FinalSub<T>>,
}

#[derive(Clone, Debug)]
enum Status<T> {
    Pending,
    Uncut,
    Final(Box<FinalCell<T>>),
}

#[derive(Clone, Debug)]
struct Cell<T> {
    parent: usize,
    family: Family,
    corners: Vec<PointKey>,
    level: usize,
    generation: usize,
    presplit_pending: bool,
    original: bool,
    alive: bool,
    status: Status<T>,
}

enum Outcome<T> {
    Uncut,
    Final(Box<FinalCell<T>>),
    Presplit { seg: SegKey, point: PointKey, code: TopologyCode, r: Point2<T> },
    Refine(String),
}

/// Crossings found on one cell edge.
struct EdgeScan<T> {
    seg: SegKey,
    geom: SegGeom<T>,
    roots: Vec<(T, PointKey)>,
}

/// Straight cell after the non-local splitting pass.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearCell<T = f64> {
    pub parent: usize,
    pub family: Family,
    pub corners: Vec<Point2<T>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitEntry<T = f64> {
    pub parent: usize,
    pub code: TopologyCode,
    /// Split point in the parent's reference coordinates.
    pub point: Point2<T>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SplitLog<T = f64> {
    pub entries: Vec<SplitEntry<T>>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DecomposeStats {
    /// Topology codes of the cells that were subdivided.
    pub histogram: BTreeMap<TopologyCode, usize>,
    /// Non-local codes that triggered a split.
    pub nonlocal: BTreeMap<TopologyCode, usize>,
    pub refinements: usize,
    pub max_level: usize,
    pub passes: usize,
}

#[derive(Clone, Debug)]
pub struct Decomposition<T = f64> {
    pub mesh: ConformingMesh<T>,
    pub stats: DecomposeStats,
    pub log: SplitLog<T>,
}

impl<'a, T: Real> Ctx<'a, T> {
    fn new(
        mesh: &'a BackgroundMesh<T>,
        field: &'a LevelSetField<T>,
        refs: &'a [ReferenceElement<T>; 2],
        opts: &'a DecomposeOptions,
    ) -> Result<Self, DecomposeError> {
        let order = mesh.order();
        if mesh.elements.iter().any(|e| e.order != order) {
            return Err(DecomposeError::Parameter("background elements must share one order".into()));
        }
        if field.len() != mesh.nodes.len() {
            return Err(DecomposeError::Parameter("level set does not match the mesh".into()));
        }
        let values = field.values();
        let adj = mesh.adjacency();
        let parents = mesh
            .elements
            .iter()
            .enumerate()
            .map(|(e, el)| {
                let re = &refs[ref_slot(el.family)];
                let vloc = re.vertex_nodes();
                Parent {
                    ef: ElementField::new(re, el.nodes.iter().map(|&n| values[n]).collect()),
                    coords: mesh.element_coords(e),
                    verts: vloc.iter().map(|&k| el.nodes[k]).collect(),
                    rv: vloc.iter().map(|&k| re.nodes()[k]).collect(),
                    edges: adj.element_edges[e].clone(),
                }
            })
            .collect();
        let scale = values.iter().fold(T::one(), |a, v| a.max(v.abs()));
        let n = &opts.newton;
        Ok(Self {
            mesh,
            values,
            node_tol: field.node_tol(),
            root_tol: (T::tol(n.tol) * scale, T::tol(n.accept) * scale),
            parents,
            refs,
            opts,
            order,
            iface_order: opts.interface_order.unwrap_or(order),
            intervals: order * (opts.grid_samples + 1),
        })
    }

    fn re(&self, family: Family) -> &ReferenceElement<T> {
        &self.refs[ref_slot(family)]
    }

    /// Background edges through `key` within parent `p`, with the key's
    /// parameter along each.
    fn on_edges(&self, p: usize, key: PointKey) -> Vec<(usize, T)> {
        let par = &self.parents[p];
        let adj = self.mesh.adjacency();
        let nv = par.verts.len();
        match key {
            PointKey::Bg(v) => (0..nv)
                .filter(|&k| par.verts[k] == v || par.verts[(k + 1) % nv] == v)
                .map(|k| {
                    let e = par.edges[k];
                    (e, if adj.edges[e].vertices.0 == v { T::zero() } else { T::one() })
                })
                .collect(),
            PointKey::Edge { edge, t } => vec![(edge, unbits(t))],
            PointKey::Interior { .. } => Vec::new(),
        }
    }

    fn r_of(&self, p: usize, key: PointKey) -> Point2<T> {
        let par = &self.parents[p];
        let nv = par.verts.len();
        match key {
            PointKey::Bg(v) => {
                let k = par.verts.iter().position(|&x| x == v).expect("vertex of parent");
                par.rv[k]
            }
            PointKey::Edge { edge, t } => {
                let k = par.edges.iter().position(|&x| x == edge).expect("edge of parent");
                let t = unbits(t);
                if par.verts[k] == self.mesh.adjacency().edges[edge].vertices.0 {
                    par.rv[k].lerp(par.rv[(k + 1) % nv], t)
                } else {
                    par.rv[(k + 1) % nv].lerp(par.rv[k], t)
                }
            }
            PointKey::Interior { x, y, .. } => Point2::new(unbits(x), unbits(y)),
        }
    }

    /// Restriction of `φ^h` to background edge `edge` and its `t`-derivative.
    fn trace(&self, edge: usize, t: T) -> (T, T) {
        let nodes = &self.mesh.adjacency().edges[edge].nodes;
        let (v, d) = line_shape(self.order, -T::one() + T::lit(2.0) * t);
        let mut f = T::zero();
        let mut g = T::zero();
        for ((vi, di), &n) in v.iter().zip(&d).zip(nodes) {
            f += *vi * self.values[n];
            g += *di * self.values[n];
        }
        (f, g * T::lit(2.0))
    }

    fn value_of(&self, p: usize, key: PointKey) -> T {
        let v = match key {
            PointKey::Bg(n) => self.values[n],
            PointKey::Edge { edge, t } => self.trace(edge, unbits(t)).0,
            PointKey::Interior { .. } => self.parents[p].ef.value(self.r_of(p, key)),
        };
        if v.abs() <= self.node_tol {
            T::zero()
        } else {
            v
        }
    }

    fn seg_geom(&self, p: usize, s: SegKey) -> SegGeom<T> {
        let a = self.on_edges(p, s.0);
        let b = self.on_edges(p, s.1);
        for &(ea, ta) in &a {
            if let Some(&(_, tb)) = b.iter().find(|(eb, _)| *eb == ea) {
                return SegGeom::Bg { edge: ea, t0: ta, t1: tb };
            }
        }
        SegGeom::Interior { r0: self.r_of(p, s.0), r1: self.r_of(p, s.1) }
    }

    fn seg_eval(&self, p: usize, g: &SegGeom<T>, t: T) -> (T, T) {
        match *g {
            SegGeom::Bg { edge, .. } => self.trace(edge, t),
            SegGeom::Interior { r0, r1 } => {
                let d = r1 - r0;
                let (v, gr) = self.parents[p].ef.eval(r0.lerp(r1, t));
                (v, gr[0] * d.x + gr[1] * d.y)
            }
        }
    }

    fn point_at(&self, p: usize, g: &SegGeom<T>, t: T) -> PointKey {
        match *g {
            SegGeom::Bg { edge, .. } => PointKey::Edge { edge, t: bits(t) },
            SegGeom::Interior { r0, r1 } => {
                let r = r0.lerp(r1, t);
                PointKey::Interior { parent: p, x: bits(r.x), y: bits(r.y) }
            }
        }
    }

    /// Parameter of a point known to lie on the segment.
    fn param_on(&self, p: usize, g: &SegGeom<T>, key: PointKey) -> T {
        match *g {
            SegGeom::Bg { edge, .. } => self
                .on_edges(p, key)
                .into_iter()
                .find(|(e, _)| *e == edge)
                .map(|(_, t)| t)
                .expect("point on edge"),
            SegGeom::Interior { r0, r1 } => {
                let d = r1 - r0;
                (self.r_of(p, key) - r0).dot(d) / d.norm_squared()
            }
        }
    }

    fn scan_edge(&self, p: usize, a: PointKey, b: PointKey, va: T, vb: T) -> Result<(EdgeScan<T>, bool), String> {
        let seg = SegKey::new(a, b);
        let ends = if seg.0 == a { (va, vb) } else { (vb, va) };
        let geom = self.seg_geom(p, seg);
        let (t0, t1) = geom.span();
        let scan = scan_segment(|t| self.seg_eval(p, &geom, t).0, t0, t1, ends, self.intervals);
        let multicut = scan.brackets.len() > 2;
        let mut roots = Vec::with_capacity(scan.brackets.len());
        for &br in &scan.brackets {
            let (t, _) = solve_bracketed(|t| self.seg_eval(p, &geom, t), br, self.root_tol.0, self.root_tol.1)
                .map_err(|e| e.to_string())?;
            roots.push((t, self.point_at(p, &geom, t)));
        }
        Ok((EdgeScan { seg, geom, roots }, multicut))
    }

    /// Sign change over the cell's sample grid, corners taken from `cv`.
    fn grid_cut(&self, p: usize, family: Family, cr: &[Point2<T>], cv: &[T]) -> bool {
        let n = self.intervals;
        let nn = T::from_count(n);
        let ef = &self.parents[p].ef;
        let (mut lo, mut hi) = (T::infinity(), T::neg_infinity());
        let mut push = |v: T| {
            lo = lo.min(v);
            hi = hi.max(v);
        };
        cv.iter().for_each(|&v| push(v));
        match family {
            Family::Triangle => {
                for j in 0..=n {
                    for i in 0..=n - j {
                        if (i, j) == (0, 0) || (i, j) == (n, 0) || (i, j) == (0, n) {
                            continue;
                        }
                        let (s, t) = (T::from_count(i) / nn, T::from_count(j) / nn);
                        let r = cr[0] * (T::one() - s - t) + cr[1] * s + cr[2] * t;
                        push(ef.value(r));
                    }
                }
            }
            _ => {
                for j in 0..=n {
                    for i in 0..=n {
                        if (i == 0 || i == n) && (j == 0 || j == n) {
                            continue;
                        }
                        let (s, t) = (T::from_count(i) / nn, T::from_count(j) / nn);
                        let r = cr[0] * ((T::one() - s) * (T::one() - t))
                            + cr[1] * (s * (T::one() - t))
                            + cr[2] * (s * t)
                            + cr[3] * ((T::one() - s) * t);
                        push(ef.value(r));
                    }
                }
            }
        }
        lo * hi < T::zero()
    }

    fn analyze(&self, cell: &Cell<T>) -> Result<Outcome<T>, DecomposeError> {
        let p = cell.parent;
        let par = &self.parents[p];
        let n = cell.corners.len();
        let cr: Vec<Point2<T>> = cell.corners.iter().map(|&k| self.r_of(p, k)).collect();
        let cv: Vec<T> = cell.corners.iter().map(|&k| self.value_of(p, k)).collect();
        let mut scans = Vec::with_capacity(n);
        let mut multicut = false;
        for k in 0..n {
            let (a, b) = (cell.corners[k], cell.corners[(k + 1) % n]);
            match self.scan_edge(p, a, b, cv[k], cv[(k + 1) % n]) {
                Ok((s, mc)) => {
                    multicut |= mc;
                    scans.push(s);
                }
                Err(e) => return Ok(Outcome::Refine(e)),
            }
        }
        let any_roots = scans.iter().any(|s| !s.roots.is_empty());
        let grid = if cell.original {
            detect_cut(&par.ef, self.opts.grid_samples)
        } else {
            self.grid_cut(p, cell.family, &cr, &cv)
        };
        if !(grid || any_roots) {
            return Ok(Outcome::Uncut);
        }
        let report = CutReport {
            is_cut: true,
            cut_edges: scans
                .iter()
                .enumerate()
                .filter(|(_, s)| !s.roots.is_empty())
                .map(|(k, s)| EdgeCut { edge: k, roots: s.roots.iter().map(|r| r.0).collect() })
                .collect(),
            cut_nodes: (0..n).filter(|&k| cv[k] == T::zero()).collect(),
            validity: Validity::Valid,
        };
        let validity = validity_of(&report, multicut);
        if validity != Validity::Valid {
            return Ok(Outcome::Refine(format!("{validity:?} cut")));
        }
        let report = CutReport { validity, ..report };
        let code = classify_topology(cell.family, &report)?;
        if !code.is_local() {
            if cell.generation >= 1 {
                return Ok(Outcome::Refine(format!("{code} after a non-local split")));
            }
            let (edge, t) = match code.kind {
                CutKind::EdgeEdge(e, _) => {
                    let r = &scans[e].roots;
                    (e, (r[0].0 + r[1].0) / T::lit(2.0))
                }
                CutKind::NodeEdge { node, edge } => {
                    let s = &scans[edge];
                    let tn = self.param_on(p, &s.geom, cell.corners[node]);
                    (edge, (tn + s.roots[0].0) / T::lit(2.0))
                }
                CutKind::NodeNode(i, j) => {
                    let e = if (i + 1) % n == j { i } else { j };
                    let (t0, t1) = scans[e].geom.span();
                    (e, (t0 + t1) / T::lit(2.0))
                }
            };
            let s = &scans[edge];
            let point = self.point_at(p, &s.geom, t);
            return Ok(Outcome::Presplit { seg: s.seg, point, code, r: self.r_of(p, point) });
        }
        self.finalize(cell, code, &scans, &cr, &cv)
    }

    fn finalize(
        &self,
        cell: &Cell<T>,
        code: TopologyCode,
        scans: &[EdgeScan<T>],
        cr: &[Point2<T>],
        cv: &[T],
    ) -> Result<Outcome<T>, DecomposeError> {
        let p = cell.parent;
        let par = &self.parents[p];
        let root = |e: Option<usize>| e.map(|e| scans[e].roots[0].1);
        let tpl = template(&code, |_| Point2::<T>::zero())?;
        let (xk, yk) = (root(tpl.x_edge), root(tpl.y_edge));
        let key_of = |v: Vertex| match v {
            Vertex::Corner(k) => cell.corners[k],
            Vertex::X => xk.expect("X root"),
            Vertex::Y => yk.expect("Y root"),
        };
        let pos_of = |v: Vertex| match v {
            Vertex::Corner(k) => cr[k],
            _ => self.r_of(p, key_of(v)),
        };
        // rebuilt with real positions for the pentagon triangulation
        let tpl = template(&code, pos_of)?;
        let endpoint = |v: Vertex| Endpoint {
            point: pos_of(v),
            kind: match v {
                Vertex::Corner(k) => EndpointKind::Vertex(k),
                Vertex::X => EndpointKind::Edge { edge: tpl.x_edge.expect("X edge"), t: scans[tpl.x_edge.expect("X edge")].roots[0].0 },
                Vertex::Y => EndpointKind::Edge { edge: tpl.y_edge.expect("Y edge"), t: scans[tpl.y_edge.expect("Y edge")].roots[0].0 },
            },
        };
        let iface = match reconstruct_between(
            &par.ef,
            p,
            endpoint(tpl.ends[0]),
            endpoint(tpl.ends[1]),
            self.iface_order,
            &self.opts.newton,
        ) {
            Ok(i) => i,
            Err(e) => return Ok(Outcome::Refine(e.to_string())),
        };
        let ends = [key_of(tpl.ends[0]), key_of(tpl.ends[1])];
        let reversed: Vec<Point2<T>> = iface.nodes.iter().rev().copied().collect();
        let parent_re = par.ef.re;
        let mut subs = Vec::with_capacity(tpl.cells.len());
        for tc in &tpl.cells {
            let corners: Vec<PointKey> = tc.vertices.iter().map(|&v| key_of(v)).collect();
            let corners_r: Vec<Point2<T>> = tc.vertices.iter().map(|&v| pos_of(v)).collect();
            let curve = tc.special.then(|| if corners[1] == ends[0] { &iface.nodes[..] } else { &reversed[..] });
            let re = self.re(tc.family);
            let r_nodes = map_subcell_nodes(re, &corners_r, curve, self.opts.psi);
            let x_nodes: Vec<Point2<T>> =
                r_nodes.iter().map(|&r| isoparametric_map(parent_re, &par.coords, r).point).collect();
            let (det, npts) = element_min_jacobian(re, &x_nodes)?;
            if det <= jacobian_tolerance(tc.family, npts) {
                return Ok(Outcome::Refine(format!("Jacobian {:e} in a {code} sub-element", det.to_f64_lossy())));
            }
            let side = tc
                .vertices
                .iter()
                .filter_map(|v| match v {
                    Vertex::Corner(k) if cv[*k] != T::zero() => Some(cv[*k]),
                    _ => None,
                })
                .fold(None, |best: Option<T>, v| match best {
                    Some(b) if b.abs() >= v.abs() => Some(b),
                    _ => Some(v),
                })
                .map(Side::of)
                .unwrap_or_else(|| {
                    let c = corners_r.iter().fold(Point2::zero(), |a, &b| a + b) / T::from_count(corners_r.len());
                    Side::of(par.ef.value(c))
                });
            subs.push(FinalSub { family: tc.family, corners, special: tc.special, r_nodes, x_nodes, side });
        }
        Ok(Outcome::Final(Box::new(FinalCell { code, ends, iface_r: iface.nodes, subs })))
    }
}

fn ref_slot(f: Family) -> usize {
    match f {
        Family::Triangle => 0,
        _ => 1,
    }
}

/// Points created so far, so that a location reached along different
/// construction paths keeps a single key.
struct PointIndex<T> {
    interior: HashMap<usize, Vec<(Point2<T>, PointKey)>>,
    edge: HashMap<usize, Vec<(T, PointKey)>>,
}

struct State<T> {
    cells: Vec<Cell<T>>,
    /// Split points per segment, with a parent the segment lies in.
    split: HashMap<SegKey, (usize, BTreeSet<PointKey>)>,
    dirty: BTreeSet<SegKey>,
    points: PointIndex<T>,
    stats: DecomposeStats,
    log: SplitLog<T>,
}

impl<T: Real> State<T> {
    fn new(ctx: &Ctx<'_, T>) -> Self {
        let cells = ctx
            .parents
            .iter()
            .enumerate()
            .map(|(e, par)| Cell {
                parent: e,
                family: ctx.mesh.elements[e].family,
                corners: par.verts.iter().map(|&v| PointKey::Bg(v)).collect(),
                level: 0,
                generation: 0,
                presplit_pending: false,
                original: true,
                alive: true,
                status: Status::Pending,
            })
            .collect();
        let points = PointIndex { interior: HashMap::new(), edge: HashMap::new() };
        Self { cells, split: HashMap::new(), dirty: BTreeSet::new(), points, stats: DecomposeStats::default(), log: SplitLog::default() }
    }

    fn canon(&mut self, ctx: &Ctx<'_, T>, key: PointKey) -> PointKey {
        let tol = T::tol(1e-12);
        match key {
            PointKey::Bg(_) => key,
            PointKey::Edge { edge, t } => {
                let t = unbits::<T>(t);
                let (a, b) = ctx.mesh.adjacency().edges[edge].vertices;
                if t <= tol {
                    return PointKey::Bg(a);
                }
                if t >= T::one() - tol {
                    return PointKey::Bg(b);
                }
                let list = self.points.edge.entry(edge).or_default();
                if let Some(&(_, k)) = list.iter().find(|(s, _)| (*s - t).abs() <= tol) {
                    return k;
                }
                list.push((t, key));
                key
            }
            PointKey::Interior { parent, .. } => {
                let r = ctx.r_of(parent, key);
                let list = self.points.interior.entry(parent).or_default();
                if let Some(&(_, k)) = list.iter().find(|(q, _)| (q.x - r.x).abs().max((q.y - r.y).abs()) <= tol) {
                    return k;
                }
                list.push((r, key));
                key
            }
        }
    }

    fn post(&mut self, parent: usize, seg: SegKey, pt: PointKey) {
        if pt == seg.0 || pt == seg.1 {
            return;
        }
        if self.split.entry(seg).or_insert_with(|| (parent, BTreeSet::new())).1.insert(pt) {
            self.dirty.insert(seg);
        }
    }

    /// Copies the split points of every segment onto each of its pieces
    /// between two of its split points, so that cells whose edge is such a
    /// piece see the points too.
    fn propagate(&mut self, ctx: &Ctx<'_, T>) {
        while let Some(seg) = self.dirty.pop_first() {
            let (p, set) = self.split[&seg].clone();
            if set.len() < 2 {
                continue;
            }
            let geom = ctx.seg_geom(p, seg);
            let (t0, t1) = geom.span();
            let mut pts: Vec<(T, PointKey)> = set.iter().map(|&q| (ctx.param_on(p, &geom, q), q)).collect();
            pts.push((t0, seg.0));
            pts.push((t1, seg.1));
            pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
            let n = pts.len();
            for i in 0..n {
                for j in i + 2..n {
                    if (i, j) == (0, n - 1) {
                        continue;
                    }
                    let sub = SegKey::new(pts[i].1, pts[j].1);
                    for q in &pts[i + 1..j] {
                        self.post(p, sub, q.1);
                    }
                }
            }
        }
    }

    fn closure(&mut self, ctx: &Ctx<'_, T>) {
        self.propagate(ctx);
        let mut work: Vec<usize> = (0..self.cells.len()).rev().filter(|&c| self.cells[c].alive).collect();
        while let Some(ci) = work.pop() {
            if !self.cells[ci].alive {
                continue;
            }
            let n = self.cells[ci].corners.len();
            let hit = (0..n).find_map(|k| {
                let c = &self.cells[ci].corners;
                let seg = SegKey::new(c[k], c[(k + 1) % n]);
                self.split.get(&seg).and_then(|s| s.1.iter().next().map(|&pt| (k, pt)))
            });
            let Some((k, pt)) = hit else { continue };
            let cell = self.cells[ci].clone();
            self.cells[ci].alive = false;
            let generation = cell.generation + usize::from(cell.presplit_pending);
            for kids in split_at_edge_point(cell.family, k) {
                let corners = kids.iter().map(|c| c.map_or(pt, |i| cell.corners[i])).collect();
                work.push(self.cells.len());
                self.cells.push(Cell {
                    parent: cell.parent,
                    family: Family::Triangle,
                    corners,
                    level: cell.level,
                    generation,
                    presplit_pending: false,
                    original: false,
                    alive: true,
                    status: Status::Pending,
                });
            }
        }
    }

    fn refine(&mut self, ctx: &Ctx<'_, T>, ci: usize) {
        let cell = self.cells[ci].clone();
        self.cells[ci].alive = false;
        let p = cell.parent;
        let n = cell.corners.len();
        let mids: Vec<PointKey> = (0..n)
            .map(|k| {
                let seg = SegKey::new(cell.corners[k], cell.corners[(k + 1) % n]);
                let geom = ctx.seg_geom(p, seg);
                let (t0, t1) = geom.span();
                let mid = self.canon(ctx, ctx.point_at(p, &geom, (t0 + t1) / T::lit(2.0)));
                self.post(p, seg, mid);
                mid
            })
            .collect();
        let center = {
            let c = cell.corners.iter().fold(Point2::zero(), |a, &k| a + ctx.r_of(p, k)) / T::from_count(n);
            self.canon(ctx, PointKey::Interior { parent: p, x: bits(c.x), y: bits(c.y) })
        };
        for kid in refinement_children(cell.family) {
            let corners = kid
                .iter()
                .map(|rp| match *rp {
                    RefinePoint::Corner(k) => cell.corners[k],
                    RefinePoint::Mid(k) => mids[k],
                    RefinePoint::Center => center,
                })
                .collect();
            self.cells.push(Cell {
                parent: p,
                family: cell.family,
                corners,
                level: cell.level + 1,
                generation: 0,
                presplit_pending: false,
                original: false,
                alive: true,
                status: Status::Pending,
            });
        }
        self.stats.refinements += 1;
        self.stats.max_level = self.stats.max_level.max(cell.level + 1);
    }

    fn analyze_pending(&self, ctx: &Ctx<'_, T>) -> Result<Vec<(usize, Outcome<T>)>, DecomposeError> {
        let pending: Vec<usize> = (0..self.cells.len())
            .filter(|&c| self.cells[c].alive && matches!(self.cells[c].status, Status::Pending))
            .collect();
        let run = |&c: &usize| ctx.analyze(&self.cells[c]).map(|o| (c, o));
        if ctx.opts.parallel {
            pending.par_iter().map(run).collect()
        } else {
            pending.iter().map(run).collect()
        }
    }

    fn apply(&mut self, ctx: &Ctx<'_, T>, results: Vec<(usize, Outcome<T>)>, presplit_only: bool) -> Result<(), DecomposeError> {
        for (ci, out) in results {
            match out {
                Outcome::Presplit { seg, point, code, r } => {
                    let point = self.canon(ctx, point);
                    self.post(self.cells[ci].parent, seg, point);
                    self.cells[ci].presplit_pending = true;
                    *self.stats.nonlocal.entry(code).or_default() += 1;
                    self.log.entries.push(SplitEntry { parent: self.cells[ci].parent, code, point: r });
                }
                _ if presplit_only => {}
                Outcome::Uncut => self.cells[ci].status = Status::Uncut,
                Outcome::Final(f) => self.cells[ci].status = Status::Final(f),
                Outcome::Refine(reason) => {
                    let cell = &self.cells[ci];
                    if cell.level >= ctx.opts.max_refine {
                        return Err(DecomposeError::RefinementExhausted {
                            element: cell.parent,
                            levels: ctx.opts.max_refine,
                            reason,
                        });
                    }
                    self.refine(ctx, ci);
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum NodeKey {
    Pt(PointKey),
    Seg(SegKey, usize),
    Iface(usize, usize),
}

#[derive(Clone, Copy)]
enum Role {
    Vertex(usize),
    Edge(usize, usize),
    Interior,
}

fn roles<T: Real>(re: &ReferenceElement<T>) -> Vec<Role> {
    let mut r = vec![Role::Interior; re.node_count()];
    let m = re.order();
    for e in 0..re.family().edge_count() {
        for (k, &n) in re.edge_nodes(e).iter().enumerate() {
            if k > 0 && k < m {
                r[n] = Role::Edge(e, k);
            }
        }
    }
    for (v, &n) in re.vertex_nodes().iter().enumerate() {
        r[n] = Role::Vertex(v);
    }
    r
}

struct Registry<'a, T> {
    mesh: &'a BackgroundMesh<T>,
    nodes: Vec<Point2<T>>,
    map: HashMap<NodeKey, usize>,
}

impl<T: Real> Registry<'_, T> {
    fn id(&mut self, key: Option<NodeKey>, x: Point2<T>) -> usize {
        let adj = self.mesh.adjacency();
        let fixed = match key {
            Some(NodeKey::Pt(PointKey::Bg(n))) => Some(n),
            Some(NodeKey::Seg(SegKey(PointKey::Bg(a), PointKey::Bg(b)), k)) => {
                adj.find(a, b).map(|e| adj.edges[e].nodes[k])
            }
            _ => None,
        };
        if let Some(n) = fixed {
            return n;
        }
        if let Some(k) = key {
            if let Some(&n) = self.map.get(&k) {
                return n;
            }
            self.map.insert(k, self.nodes.len());
        }
        self.nodes.push(x);
        self.nodes.len() - 1
    }
}

fn build_context<'a, T: Real>(
    mesh: &'a BackgroundMesh<T>,
    field: &'a LevelSetField<T>,
    refs: &'a [ReferenceElement<T>; 2],
    opts: &'a DecomposeOptions,
) -> Result<Ctx<'a, T>, DecomposeError> {
    if opts.psi == PsiVariant::Ramp {
        return Err(DecomposeError::Parameter(
            "the ramp mapping bends the straight sub-element edges and cannot produce a conforming mesh".into(),
        ));
    }
    if opts.grid_samples == 0 && mesh.order() == 1 && opts.max_refine == 0 {
        return Err(DecomposeError::Parameter("no sampling and no refinement leaves cuts undetectable".into()));
    }
    Ctx::new(mesh, field, refs, opts)
}

fn reference_pair<T: Real>(order: usize) -> Result<[ReferenceElement<T>; 2], DecomposeError> {
    Ok([ReferenceElement::new(Family::Triangle, order)?, ReferenceElement::new(Family::Quadrilateral, order)?])
}

/// Splits every non-locally cut element once, with compatible splits of
/// the neighbors, and returns the resulting straight cells.
pub fn nonlocal_presplit<T: Real>(
    mesh: &BackgroundMesh<T>,
    field: &LevelSetField<T>,
    opts: &DecomposeOptions,
) -> Result<(Vec<LinearCell<T>>, SplitLog<T>), DecomposeError> {
    let refs = reference_pair(mesh.order())?;
    let ctx = build_context(mesh, field, &refs, opts)?;
    let mut st = State::new(&ctx);
    let results = st.analyze_pending(&ctx)?;
    st.apply(&ctx, results, true)?;
    st.closure(&ctx);
    let cells = st
        .cells
        .iter()
        .filter(|c| c.alive)
        .map(|c| LinearCell {
            parent: c.parent,
            family: c.family,
            corners: c.corners.iter().map(|&k| ctx.r_of(c.parent, k)).collect(),
        })
        .collect();
    Ok((cells, st.log))
}

/// Decomposes `mesh` along the zero level set of `field`.
pub fn decompose_mesh<T: Real>(
    mesh: &BackgroundMesh<T>,
    field: &LevelSetField<T>,
    opts: &DecomposeOptions,
) -> Result<Decomposition<T>, DecomposeError> {
    let refs = reference_pair(mesh.order())?;
    let ctx = build_context(mesh, field, &refs, opts)?;
    let mut st = State::new(&ctx);
    loop {
        st.closure(&ctx);
        let results = st.analyze_pending(&ctx)?;
        if results.is_empty() {
            break;
        }
        st.stats.passes += 1;
        if st.stats.passes > MAX_PASSES {
            return Err(DecomposeError::Parameter("decomposition did not settle".into()));
        }
        st.apply(&ctx, results, false)?;
    }
    let mesh_out = emit(&ctx, &mut st)?;
    Ok(Decomposition { mesh: mesh_out, stats: st.stats, log: st.log })
}

fn emit<T: Real>(ctx: &Ctx<'_, T>, st: &mut State<T>) -> Result<ConformingMesh<T>, DecomposeError> {
    let mesh = ctx.mesh;
    let m = ctx.order;
    let mut reg = Registry { mesh, nodes: mesh.nodes.clone(), map: HashMap::new() };
    let role_sets = [roles(&ctx.refs[0]), roles(&ctx.refs[1])];
    let mut elements = Vec::new();
    let mut facets = Vec::new();
    let straight_side = |vals: &[T]| {
        let v = vals.iter().copied().fold(T::zero(), |a, v| if v.abs() > a.abs() { v } else { a });
        Side::of(v)
    };
    let node_keys = |family: Family, corners: &[PointKey], special: Option<(usize, bool)>| -> Vec<Option<NodeKey>> {
        let n = corners.len();
        role_sets[ref_slot(family)]
            .iter()
            .map(|role| match *role {
                Role::Vertex(v) => Some(NodeKey::Pt(corners[v])),
                Role::Edge(1, k) if special.is_some() => {
                    let (cell, forward) = special.expect("special edge");
                    Some(NodeKey::Iface(cell, if forward { k } else { m - k }))
                }
                Role::Edge(e, k) => {
                    let seg = SegKey::new(corners[e], corners[(e + 1) % n]);
                    Some(NodeKey::Seg(seg, if seg.0 == corners[e] { k } else { m - k }))
                }
                Role::Interior => None,
            })
            .collect()
    };
    for (ci, cell) in st.cells.iter().enumerate() {
        if !cell.alive {
            continue;
        }
        let p = cell.parent;
        let par = &ctx.parents[p];
        let parent_family = mesh.elements[p].family;
        match &cell.status {
            Status::Pending => unreachable!("all cells analyzed"),
            Status::Uncut if cell.original => {
                let el = &mesh.elements[p];
                let vals: Vec<T> = el.nodes.iter().map(|&n| ctx.values[n]).collect();
                elements.push(ConformingElement {
                    family: el.family,
                    order: el.order,
                    nodes: el.nodes.clone(),
                    side: straight_side(&vals),
                    parent: p,
                    parent_family,
                    topology: None,
                    psi: None,
                    r_nodes: par.ef.re.nodes().to_vec(),
                });
            }
            Status::Uncut => {
                let re = ctx.re(cell.family);
                let cr: Vec<Point2<T>> = cell.corners.iter().map(|&k| ctx.r_of(p, k)).collect();
                let cv: Vec<T> = cell.corners.iter().map(|&k| ctx.value_of(p, k)).collect();
                let r_nodes = map_subcell_nodes(re, &cr, None, ctx.opts.psi);
                let keys = node_keys(cell.family, &cell.corners, None);
                let nodes = keys
                    .iter()
                    .zip(&r_nodes)
                    .map(|(k, &r)| reg.id(*k, isoparametric_map(par.ef.re, &par.coords, r).point))
                    .collect();
                elements.push(ConformingElement {
                    family: cell.family,
                    order: m,
                    nodes,
                    side: straight_side(&cv),
                    parent: p,
                    parent_family,
                    topology: None,
                    psi: None,
                    r_nodes,
                });
            }
            Status::Final(f) => {
                *st.stats.histogram.entry(f.code).or_default() += 1;
                for sub in &f.subs {
                    let special = sub.special.then_some((ci, sub.corners[1] == f.ends[0]));
                    let keys = node_keys(sub.family, &sub.corners, special);
                    let nodes = keys.iter().zip(&sub.x_nodes).map(|(k, &x)| reg.id(*k, x)).collect();
                    elements.push(ConformingElement {
                        family: sub.family,
                        order: m,
                        nodes,
                        side: sub.side,
                        parent: p,
                        parent_family,
                        topology: Some(f.code),
                        psi: Some(ctx.opts.psi.for_family(sub.family)),
                        r_nodes: sub.r_nodes.clone(),
                    });
                }
                let r_nodes: Vec<Point2<T>> = (0..=m)
                    .map(|k| {
                        if f.iface_r.len() == m + 1 {
                            f.iface_r[k]
                        } else {
                            line_map(&f.iface_r, -T::one() + T::lit(2.0) * T::from_count(k) / T::from_count(m)).point
                        }
                    })
                    .collect();
                let nodes = (0..=m)
                    .map(|k| {
                        let key = match k {
                            0 => NodeKey::Pt(f.ends[0]),
                            k if k == m => NodeKey::Pt(f.ends[1]),
                            k => NodeKey::Iface(ci, k),
                        };
                        reg.id(Some(key), isoparametric_map(par.ef.re, &par.coords, r_nodes[k]).point)
                    })
                    .collect();
                facets.push(InterfaceFacet { order: m, parent: p, nodes, r_nodes });
            }
        }
    }
    let mut out = ConformingMesh { nodes: reg.nodes, elements, facets, domain: Some(mesh.domain) };
    compact(&mut out);
    Ok(out)
}

fn compact<T: Real>(mesh: &mut ConformingMesh<T>) {
    let mut used = vec![false; mesh.nodes.len()];
    for n in mesh.elements.iter().flat_map(|e| &e.nodes).chain(mesh.facets.iter().flat_map(|f| &f.nodes)) {
        used[*n] = true;
    }
    if used.iter().all(|&u| u) {
        return;
    }
    let mut map = vec![usize::MAX; used.len()];
    let mut nodes = Vec::new();
    for (i, &u) in used.iter().enumerate() {
        if u {
            map[i] = nodes.len();
            nodes.push(mesh.nodes[i]);
        }
    }
    for n in mesh.elements.iter_mut().flat_map(|e| e.nodes.iter_mut()).chain(mesh.facets.iter_mut().flat_map(|f| f.nodes.iter_mut())) {
        *n = map[*n];
    }
    mesh.nodes = nodes;
}

/// Largest `|φ^h|` over the interface facet nodes, evaluated in the parent
/// elements.
pub fn interface_residual<T: Real>(mesh: &BackgroundMesh<T>, field: &LevelSetField<T>, out: &ConformingMesh<T>) -> T {
    let mut cache = crate::mesh::RefCache::<T>::default();
    let mut worst = T::zero();
    for f in &out.facets {
        let el = &mesh.elements[f.parent];
        let re = cache.get(el.family, el.order).expect("mesh order is supported");
        let ef = field.on_element(mesh, re, f.parent);
        for &r in &f.r_nodes {
            worst = worst.max(ef.value(r).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levelset::Shape;
    use crate::mesh::build_cartesian;
    use crate::BoundingBox;

    fn circle_case(family: Family, l: usize, m: usize, r: f64) -> (BackgroundMesh<f64>, LevelSetField<f64>) {
        let mesh = build_cartesian(BoundingBox::symmetric_unit(), l, family, m).unwrap();
        let field = LevelSetField::from_fn(&mesh, Shape::circle(r).as_fn());
        (mesh, field)
    }

    #[test]
    fn uncut_mesh_is_unchanged() {
        let (mesh, _) = circle_case(Family::Quadrilateral, 3, 2, 0.4);
        let field = LevelSetField::from_fn(&mesh, |p| p.x + 5.0);
        let d = decompose_mesh(&mesh, &field, &DecomposeOptions::default()).unwrap();
        assert_eq!(d.mesh.nodes, mesh.nodes);
        assert_eq!(d.mesh.elements.len(), mesh.elements.len());
        for (a, b) in d.mesh.elements.iter().zip(&mesh.elements) {
            assert_eq!(a.nodes, b.nodes);
            assert!(a.is_original());
        }
        assert!(d.mesh.facets.is_empty());
        let (cells, log) = nonlocal_presplit(&mesh, &field, &DecomposeOptions::default()).unwrap();
        assert_eq!(cells.len(), mesh.elements.len());
        assert!(log.entries.is_empty());
    }

    #[test]
    fn circle_interface_nodes_lie_on_circle() {
        for family in [Family::Quadrilateral, Family::Triangle] {
            let (mesh, field) = circle_case(family, 8, 2, 0.4);
            let d = decompose_mesh(&mesh, &field, &DecomposeOptions::default()).unwrap();
            assert!(!d.mesh.facets.is_empty());
            for f in 0..d.mesh.facets.len() {
                for x in d.mesh.facet_coords(f) {
                    assert!((x.norm() - 0.4).abs() < 1e-2, "{family}");
                }
            }
            assert!(interface_residual(&mesh, &field, &d.mesh) < 1e-10);
            let rep = d.mesh.conformity().unwrap();
            assert!(rep.is_conforming(1e-12), "{family}: {rep:?}");
            assert!(d.mesh.max_tiling_error().unwrap() < 1e-10);
            assert!(d.mesh.min_jacobian().unwrap().unwrap().1 > 0.0);
        }
    }

    #[test]
    fn exact_quadratic_circle_is_exact_at_nodes() {
        let mesh = build_cartesian(BoundingBox::symmetric_unit(), 8, Family::Quadrilateral, 2).unwrap();
        let f = |p: Point2<f64>| p.x * p.x + p.y * p.y - 0.16;
        let field = LevelSetField::from_fn(&mesh, f);
        let d = decompose_mesh(&mesh, &field, &DecomposeOptions::default()).unwrap();
        for k in 0..d.mesh.facets.len() {
            for x in d.mesh.facet_coords(k) {
                assert!(f(x).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn twice_cut_diagonal_is_split_in_both_triangles() {
        let mesh = build_cartesian(BoundingBox::symmetric_unit(), 1, Family::Triangle, 2).unwrap();
        let field = LevelSetField::from_fn(&mesh, |p: Point2<f64>| (p.x - 0.3).powi(2) + (p.y + 0.3).powi(2) - 0.25);
        let opts = DecomposeOptions::default();
        let (cells, log) = nonlocal_presplit(&mesh, &field, &opts).unwrap();
        assert!(!log.entries.is_empty());
        assert!(log.entries.iter().all(|e| !e.code.is_local()));
        assert_eq!(cells.len(), 4);
        let d = decompose_mesh(&mesh, &field, &opts).unwrap();
        assert!(d.mesh.conformity().unwrap().is_conforming(1e-12));
        assert!(d.mesh.max_tiling_error().unwrap() < 1e-10);
        assert!(d.stats.histogram.keys().all(|c| c.is_local()));
    }

    #[test]
    fn ramp_is_rejected() {
        let (mesh, field) = circle_case(Family::Triangle, 2, 2, 0.4);
        let opts = DecomposeOptions { psi: PsiVariant::Ramp, ..Default::default() };
        assert!(matches!(decompose_mesh(&mesh, &field, &opts), Err(DecomposeError::Parameter(_))));
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let (mesh, field) = circle_case(Family::Quadrilateral, 6, 3, 0.45);
        let a = decompose_mesh(&mesh, &field, &DecomposeOptions::default()).unwrap();
        let b = decompose_mesh(&mesh, &field, &DecomposeOptions { parallel: false, ..Default::default() }).unwrap();
        assert_eq!(a.mesh.nodes, b.mesh.nodes);
        assert_eq!(a.mesh.elements.len(), b.mesh.elements.len());
    }

    #[test]
    fn small_inclusion_triggers_refinement() {
        // a circle inside one element: no boundary crossing at level 0
        let (mesh, _) = circle_case(Family::Quadrilateral, 2, 2, 0.1);
        let field = LevelSetField::from_fn(&mesh, |p: Point2<f64>| (p.x - 0.5).powi(2) + (p.y - 0.5).powi(2) - 0.04);
        let d = decompose_mesh(&mesh, &field, &DecomposeOptions::default()).unwrap();
        assert!(d.stats.refinements >= 1);
        assert!(d.mesh.conformity().unwrap().is_conforming(1e-12));
        assert!(d.mesh.max_tiling_error().unwrap() < 1e-10);
    }

    #[test]
    fn refinement_budget_is_reported() {
        let (mesh, _) = circle_case(Family::Quadrilateral, 2, 2, 0.1);
        let field = LevelSetField::from_fn(&mesh, |p: Point2<f64>| (p.x - 0.5).powi(2) + (p.y - 0.5).powi(2) - 0.04);
        let opts = DecomposeOptions { max_refine: 0, ..Default::default() };
        match decompose_mesh(&mesh, &field, &opts) {
            Err(DecomposeError::RefinementExhausted { element, .. }) => assert_eq!(element, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn coarse_flower_with_presplits_and_refinement() {
        let shape = Shape::flower(0.48, 0.05, 6.0);
        for family in [Family::Quadrilateral, Family::Triangle] {
            for (m, delta) in (1..=4).flat_map(|m| [(m, 0.0), (m, 0.15)]) {
                let mesh = build_cartesian(BoundingBox::symmetric_unit(), 8, family, m).unwrap();
                let mesh = crate::mesh::deform(&mesh, delta).unwrap();
                let field = LevelSetField::from_fn(&mesh, shape.as_fn());
                let d = decompose_mesh(&mesh, &field, &DecomposeOptions::default()).unwrap();
                let rep = d.mesh.conformity().unwrap();
                assert!(rep.is_conforming(1e-12), "{family} m={m} delta={delta}: {rep:?}");
                assert!(d.mesh.max_tiling_error().unwrap() < 1e-10);
                assert!(d.mesh.min_jacobian().unwrap().unwrap().1 > 0.0);
                assert!(interface_residual(&mesh, &field, &d.mesh) < 1e-10);
            }
        }
    }
}
