//! Higher-order reconstruction of the zero level set inside an element.
//!
//! Boundary roots come from a safeguarded Newton iteration on a sign
//! bracket. Interior nodes start on the straight chord between the two
//! roots and are moved onto `φ^h = 0` by Newton steps along the fixed ray
//! `P + t N`, `N = ∇φ^h(P)`.

use thiserror::Error;

use crate::levelset::{CutReport, ElementField, Validity};
use crate::{Point2, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReconstructError {
    #[error("root bracketing stagnated with residual {residual:e}")]
    BisectionStagnated { residual: f64 },
    #[error("Newton iteration did not converge in {iterations} steps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("search direction is degenerate")]
    DegenerateDirection,
    #[error("Newton iterate left the reference domain")]
    LeftDomain,
    #[error("interface nodes fold back at node {0}")]
    FoldBack(usize),
    #[error("cut is not reconstructible: {0}")]
    InvalidCut(String),
}

/// Tolerances of the root searches. Residual tolerances are absolute for
/// fields of unit scale and are multiplied by `max(1, max|φ_i|)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    /// Residual accepted when the iteration budget is exhausted.
    pub accept: f64,
    pub max_iter: usize,
    /// Relative threshold on `|∇φ^h · N| / (‖∇φ^h‖ ‖N‖)`.
    pub degeneracy: f64,
    /// Re-evaluate the search direction at every iterate.
    pub refresh_direction: bool,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-12, accept: 1e-10, max_iter: 50, degeneracy: 1e-13, refresh_direction: false }
    }
}

/// Where an interface endpoint sits on the element boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EndpointKind<T = f64> {
    /// Root on local edge `edge` at parameter `t` from vertex `edge`.
    Edge { edge: usize, t: T },
    /// Cut vertex.
    Vertex(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Endpoint<T = f64> {
    pub point: Point2<T>,
    pub kind: EndpointKind<T>,
}

/// Interface element with nodes in the parent's reference coordinates,
/// ordered from `endpoints[0]` to `endpoints[1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct InterfaceElement<T = f64> {
    pub order: usize,
    pub nodes: Vec<Point2<T>>,
    pub parent: usize,
    pub endpoints: [Endpoint<T>; 2],
    /// Newton iterations per interior node.
    pub iterations: Vec<usize>,
}

impl<T: Real> InterfaceElement<T> {
    /// Point at `u` in [-1, 1].
    pub fn point_at(&self, u: T) -> Point2<T> {
        crate::refelem::line_map(&self.nodes, u).point
    }

    pub fn reversed(&self) -> Self {
        let mut out = self.clone();
        out.nodes.reverse();
        out.endpoints.reverse();
        out.iterations.reverse();
        out
    }
}

fn scale_of<T: Real>(ef: &ElementField<'_, T>) -> T {
    ef.values.iter().fold(T::one(), |a, v| a.max(v.abs()))
}

/// Root of a scalar function with derivative on a sign bracket: Newton from
/// the midpoint, falling back to bisection whenever a step leaves the
/// bracket. Iterates until `|f| <= tol` and the Newton step is at rounding
/// level; a residual within `accept` is returned if the bracket collapses
/// first. Returns the root and the number of iterations.
pub fn solve_bracketed<T: Real>(
    f: impl Fn(T) -> (T, T),
    bracket: (T, T),
    tol: T,
    accept: T,
) -> Result<(T, usize), ReconstructError> {
    let (mut lo, mut hi) = if bracket.0 <= bracket.1 { bracket } else { (bracket.1, bracket.0) };
    let neg_lo = f(lo).0 < T::zero();
    let two = T::lit(2.0);
    let mut t = (lo + hi) / two;
    let mut best = (t, T::infinity());
    for it in 0..200 {
        let (v, d) = f(t);
        if v.abs() < best.1 {
            best = (t, v.abs());
        }
        let step = if d == T::zero() { T::infinity() } else { (v / d).abs() };
        if v == T::zero() || (v.abs() <= tol && step <= T::epsilon() * T::lit(4.0) * T::one().max(t.abs())) {
            return Ok((t, it));
        }
        if (v < T::zero()) == neg_lo {
            lo = t;
        } else {
            hi = t;
        }
        let width = hi - lo;
        if width <= T::epsilon() * T::lit(4.0) * T::one().max(t.abs()) {
            break;
        }
        let newton = t - v / d;
        t = if d != T::zero() && newton >= lo && newton <= hi { newton } else { (lo + hi) / two };
    }
    if best.1 <= accept {
        Ok((best.0, 200))
    } else {
        Err(ReconstructError::BisectionStagnated { residual: best.1.to_f64_lossy() })
    }
}

/// Root of `φ^h` on the straight reference segment `a → b` inside the
/// parameter bracket. Returns the parameter and the point.
pub fn edge_root<T: Real>(
    ef: &ElementField<'_, T>,
    a: Point2<T>,
    b: Point2<T>,
    bracket: (T, T),
) -> Result<(T, Point2<T>), ReconstructError> {
    let opts = NewtonOptions::default();
    let s = scale_of(ef);
    let d = b - a;
    let f = |t: T| {
        let (v, g) = ef.eval(a.lerp(b, t));
        (v, g[0] * d.x + g[1] * d.y)
    };
    let (t, _) = solve_bracketed(f, bracket, T::tol(opts.tol) * s, T::tol(opts.accept) * s)?;
    Ok((t, a.lerp(b, t)))
}

/// `order + 1` equispaced points from `ra` to `rb`.
pub fn linear_reconstruction<T: Real>(ra: Point2<T>, rb: Point2<T>, order: usize) -> Vec<Point2<T>> {
    let m = order.max(1);
    (0..=m)
        .map(|k| match k {
            0 => ra,
            k if k == m => rb,
            k => ra.lerp(rb, T::from_count(k) / T::from_count(m)),
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InteriorRoot<T = f64> {
    pub point: Point2<T>,
    pub iterations: usize,
}

/// Newton iteration along the ray through `p` in direction `∇φ^h(p)`.
pub fn interior_root<T: Real>(
    ef: &ElementField<'_, T>,
    p: Point2<T>,
    opts: &NewtonOptions,
) -> Result<InteriorRoot<T>, ReconstructError> {
    let s = scale_of(ef);
    let tol = T::tol(opts.tol) * s;
    let step_tol = T::tol(opts.tol);
    let accept = T::tol(opts.accept) * s;
    let family = ef.family();
    let (mut v, g0) = ef.eval(p);
    if v.abs() <= tol {
        return Ok(InteriorRoot { point: p, iterations: 0 });
    }
    let mut n = Point2::new(g0[0], g0[1]);
    if n.norm() == T::zero() {
        return Err(ReconstructError::DegenerateDirection);
    }
    let mut r = p;
    let mut g = g0;
    for it in 1..=opts.max_iter {
        if opts.refresh_direction {
            n = Point2::new(g[0], g[1]);
        }
        let gn = g[0] * n.x + g[1] * n.y;
        let gnorm = (g[0] * g[0] + g[1] * g[1]).sqrt();
        if gn.abs() <= T::lit(opts.degeneracy) * gnorm * n.norm() || gn == T::zero() {
            return Err(ReconstructError::DegenerateDirection);
        }
        r -= n * (v / gn);
        if !family.contains(r, T::tol(1e-12)) {
            return Err(ReconstructError::LeftDomain);
        }
        let (nv, ng) = ef.eval(r);
        v = nv;
        g = ng;
        let gn_next = g[0] * n.x + g[1] * n.y;
        let predicted = if gn_next == T::zero() { T::infinity() } else { (v / gn_next).abs() * n.norm() };
        if v.abs() <= tol && predicted <= step_tol {
            return Ok(InteriorRoot { point: r, iterations: it });
        }
    }
    if v.abs() <= accept {
        Ok(InteriorRoot { point: r, iterations: opts.max_iter })
    } else {
        Err(ReconstructError::NoConvergence { iterations: opts.max_iter, residual: v.abs().to_f64_lossy() })
    }
}

/// Index of the first node where consecutive chords turn back.
pub fn fold_back<T: Real>(nodes: &[Point2<T>]) -> Option<usize> {
    (1..nodes.len().saturating_sub(1)).find(|&k| {
        let c0 = nodes[k] - nodes[k - 1];
        let c1 = nodes[k + 1] - nodes[k];
        c0.dot(c1) <= T::zero()
    })
}

/// Interface element of order `order` between two boundary endpoints.
pub fn reconstruct_between<T: Real>(
    ef: &ElementField<'_, T>,
    parent: usize,
    a: Endpoint<T>,
    b: Endpoint<T>,
    order: usize,
    opts: &NewtonOptions,
) -> Result<InterfaceElement<T>, ReconstructError> {
    if a.point == b.point {
        return Err(ReconstructError::InvalidCut("coincident endpoints".into()));
    }
    let mut nodes = linear_reconstruction(a.point, b.point, order);
    let mut iterations = vec![0; nodes.len()];
    let last = nodes.len() - 1;
    for k in 1..last {
        let root = interior_root(ef, nodes[k], opts)?;
        nodes[k] = root.point;
        iterations[k] = root.iterations;
    }
    if let Some(k) = fold_back(&nodes) {
        return Err(ReconstructError::FoldBack(k));
    }
    Ok(InterfaceElement { order, nodes, parent, endpoints: [a, b], iterations })
}

/// Reconstruction from a valid cut report with exactly two crossings.
pub fn reconstruct<T: Real>(
    ef: &ElementField<'_, T>,
    parent: usize,
    report: &CutReport<T>,
    order: usize,
    opts: &NewtonOptions,
) -> Result<InterfaceElement<T>, ReconstructError> {
    if report.validity != Validity::Valid || report.crossing_count() != 2 {
        return Err(ReconstructError::InvalidCut(format!(
            "{:?} with {} crossings",
            report.validity,
            report.crossing_count()
        )));
    }
    let re = ef.re;
    let verts = re.vertex_nodes();
    let nv = verts.len();
    let rv = |k: usize| re.nodes()[verts[k % nv]];
    let mut ends: Vec<Endpoint<T>> = report
        .cut_nodes
        .iter()
        .map(|&v| Endpoint { point: rv(v), kind: EndpointKind::Vertex(v) })
        .collect();
    for c in &report.cut_edges {
        for &t in &c.roots {
            ends.push(Endpoint { point: rv(c.edge).lerp(rv(c.edge + 1), t), kind: EndpointKind::Edge { edge: c.edge, t } });
        }
    }
    reconstruct_between(ef, parent, ends[0], ends[1], order, opts)
}
