use cdfem::decompose::interface_residual;
use cdfem::levelset::{classify_cut, ElementField, LevelSetField, Validity};
use cdfem::mesh::{BackgroundMesh, ConformingMesh, Side};
use cdfem::reconstruct::{reconstruct, NewtonOptions};
use cdfem::refelem::{isoparametric_map, quadrature, Family, ReferenceElement};
use cdfem::Point2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::BenchError;

pub const TILING_TOL: f64 = 1e-10;
pub const EDGE_TOL: f64 = 1e-12;
pub const INTERFACE_TOL: f64 = 1e-10;
pub const ROOT_TOL: f64 = 1e-10;

/// Geometric checks of one decomposed mesh.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConformityCheck {
    pub tiling: f64,
    pub edge_mismatch: f64,
    pub open_edges: usize,
    pub overloaded_edges: usize,
    pub min_jacobian: f64,
    pub interface_residual: f64,
}

impl ConformityCheck {
    pub fn run(bg: &BackgroundMesh<f64>, field: &LevelSetField<f64>, mesh: &ConformingMesh<f64>) -> Result<Self, BenchError> {
        let c = mesh.conformity()?;
        Ok(Self {
            tiling: mesh.max_tiling_error()?,
            edge_mismatch: c.max_edge_mismatch,
            open_edges: c.open_edges,
            overloaded_edges: c.overloaded_edges,
            min_jacobian: mesh.min_jacobian()?.map_or(f64::NAN, |(_, d)| d),
            interface_residual: interface_residual(bg, field, mesh),
        })
    }

    pub fn passed(&self) -> bool {
        self.tiling <= TILING_TOL
            && self.edge_mismatch <= EDGE_TOL
            && self.open_edges == 0
            && self.overloaded_edges == 0
            && self.min_jacobian > 0.0
            && self.interface_residual <= INTERFACE_TOL
    }

    pub fn summary(&self) -> String {
        format!(
            "tiling {:.1e}, edge mismatch {:.1e}, open {}, overloaded {}, min det {:.2e}, |phi_h| {:.1e}",
            self.tiling, self.edge_mismatch, self.open_edges, self.overloaded_edges, self.min_jacobian, self.interface_residual
        )
    }
}

/// Newton roots of randomized cut elements against bracketing oracles.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct OracleReport {
    pub elements: usize,
    pub edge_roots: usize,
    pub interior_nodes: usize,
    pub max_edge_error: f64,
    pub max_interior_error: f64,
    /// Root count disagreements and reconstruction failures.
    pub failures: usize,
    pub chords: usize,
    pub max_chord_error: f64,
}

impl OracleReport {
    pub fn passed(&self, elements: usize) -> bool {
        self.elements >= elements
            && self.chords >= elements
            && self.failures == 0
            && self.max_edge_error <= ROOT_TOL
            && self.max_interior_error <= ROOT_TOL
            && self.max_chord_error <= ROOT_TOL
    }
}

/// Roots of `g` on `[a, b]` by dense sign scanning and bisection.
pub fn bisection_roots(g: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> Vec<f64> {
    let mut roots = Vec::new();
    let t = |k: usize| a + (b - a) * k as f64 / intervals as f64;
    let mut prev = g(a);
    for k in 1..=intervals {
        let v = g(t(k));
        if (prev < 0.0) != (v < 0.0) {
            roots.push(bisect(&g, t(k - 1), t(k)));
        }
        prev = v;
    }
    roots
}

fn bisect(g: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let neg = g(lo) < 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (g(mid) < 0.0) == neg {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Nearest root of `φ^h(q + s n)` in the downhill direction, found by
/// marching in small steps and bisecting the first sign change.
fn ray_root(ef: &ElementField<'_, f64>, q: Point2<f64>, n: Point2<f64>) -> Option<Point2<f64>> {
    let (v0, g) = ef.eval(q);
    let slope = g[0] * n.x + g[1] * n.y;
    let dir = if (v0 > 0.0) == (slope > 0.0) { -1.0 } else { 1.0 };
    let step = 1e-3 / n.norm();
    let f = |s: f64| ef.value(q + n * (dir * s));
    let mut prev = 0.0;
    for k in 1..=4000 {
        let s = k as f64 * step;
        if !ef.family().contains(q + n * (dir * s), 1e-9) {
            return None;
        }
        if (f(s) < 0.0) != (v0 < 0.0) {
            return Some(q + n * (dir * bisect(&f, prev, s)));
        }
        prev = s;
    }
    None
}

fn random_point(rng: &mut ChaCha8Rng, family: Family, margin: f64) -> Point2<f64> {
    loop {
        let p = match family {
            Family::Triangle => Point2::new(rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)),
            _ => Point2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
        };
        let inside = match family {
            Family::Triangle => p.x > margin && p.y > margin && p.x + p.y < 1.0 - margin,
            _ => p.x.abs() < 1.0 - margin && p.y.abs() < 1.0 - margin,
        };
        if inside {
            return p;
        }
    }
}

/// `count` random curved cuts and `count` straight cuts of reference
/// elements of order 1..4.
pub fn oracle_suite(count: usize, seed: u64) -> Result<OracleReport, BenchError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let refs: Vec<ReferenceElement<f64>> = [Family::Triangle, Family::Quadrilateral]
        .into_iter()
        .flat_map(|f| (1..=4).map(move |m| (f, m)))
        .map(|(f, m)| ReferenceElement::new(f, m))
        .collect::<Result<_, _>>()?;
    let opts = NewtonOptions::default();
    let mut out = OracleReport::default();
    while out.elements < count || out.chords < count {
        let re = &refs[rng.random_range(0..refs.len())];
        let family = re.family();
        let p0 = random_point(&mut rng, family, 0.05);
        let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let normal = Point2::new(angle.cos(), angle.sin());
        let straight = out.elements >= count;
        let kappa = if straight { 0.0 } else { rng.random_range(-0.25..0.25) };
        let values: Vec<f64> = re
            .nodes()
            .iter()
            .map(|&p| {
                let d = p - p0;
                normal.dot(d) + kappa * d.norm_squared()
            })
            .collect();
        let ef = ElementField::new(re, values.clone());
        let field = LevelSetField::from_nodal(values);
        let Ok(report) = classify_cut(&ef, &field) else { continue };
        if report.validity != Validity::Valid || report.crossing_count() != 2 || !report.cut_nodes.is_empty() {
            continue;
        }
        let Ok(iface) = reconstruct(&ef, 0, &report, re.order(), &opts) else {
            out.failures += 1;
            continue;
        };
        let verts = re.vertex_nodes();
        let nv = verts.len();
        let rv = |k: usize| re.nodes()[verts[k % nv]];
        if straight {
            // the zero line meets each cut edge where n·(x - p0) = 0
            let mut err: f64 = 0.0;
            for c in &report.cut_edges {
                let (a, b) = (rv(c.edge), rv(c.edge + 1));
                let t = normal.dot(p0 - a) / normal.dot(b - a);
                err = err.max(c.roots.iter().map(|r| (r - t).abs() * a.distance(b)).fold(0.0, f64::max));
            }
            let m = iface.order;
            let (ra, rb) = (iface.nodes[0], iface.nodes[m]);
            for (k, p) in iface.nodes.iter().enumerate() {
                err = err.max(p.distance(ra.lerp(rb, k as f64 / m as f64)));
            }
            out.chords += 1;
            out.max_chord_error = out.max_chord_error.max(err);
            continue;
        }
        for c in &report.cut_edges {
            let (a, b) = (rv(c.edge), rv(c.edge + 1));
            let oracle = bisection_roots(|t| ef.value(a.lerp(b, t)), 0.0, 1.0, 4096);
            if oracle.len() != c.roots.len() {
                out.failures += 1;
                continue;
            }
            let mut got = c.roots.clone();
            got.sort_by(f64::total_cmp);
            for (o, g) in oracle.iter().zip(&got) {
                out.max_edge_error = out.max_edge_error.max((o - g).abs() * a.distance(b));
                out.edge_roots += 1;
            }
        }
        let m = iface.order;
        let (ra, rb) = (iface.endpoints[0].point, iface.endpoints[1].point);
        for k in 1..m {
            let q = ra.lerp(rb, k as f64 / m as f64);
            let (_, g) = ef.eval(q);
            match ray_root(&ef, q, Point2::new(g[0], g[1])) {
                Some(p) => {
                    out.max_interior_error = out.max_interior_error.max(p.distance(iface.nodes[k]));
                    out.interior_nodes += 1;
                }
                None => out.failures += 1,
            }
        }
        out.elements += 1;
    }
    Ok(out)
}

/// Area of the minus side of a decomposed mesh against uniform sampling of
/// the sign of `φ^h` on a Cartesian quadrilateral background.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AreaCheck {
    pub mesh_area: f64,
    pub sampled_area: f64,
    pub sigma: f64,
    pub samples: usize,
}

impl AreaCheck {
    pub fn deviation(&self) -> f64 {
        (self.mesh_area - self.sampled_area).abs() / self.sigma
    }

    pub fn passed(&self) -> bool {
        self.deviation() <= 3.0
    }
}

pub fn side_area(mesh: &ConformingMesh<f64>, side: Side) -> Result<f64, BenchError> {
    let mut area = 0.0;
    for (e, el) in mesh.elements.iter().enumerate().filter(|(_, el)| el.side == side) {
        let re = ReferenceElement::<f64>::new(el.family, el.order)?;
        let q = quadrature::<f64>(el.family, 2 * el.order + 2)?;
        let coords = mesh.element_coords(e);
        for (p, w) in q.iter() {
            area += w * isoparametric_map(&re, &coords, p).det;
        }
    }
    Ok(area)
}

pub fn monte_carlo_area(
    bg: &BackgroundMesh<f64>,
    field: &LevelSetField<f64>,
    mesh: &ConformingMesh<f64>,
    samples: usize,
    seed: u64,
) -> Result<AreaCheck, BenchError> {
    let d = bg.domain;
    let cells = (d.width() / bg.h).round() as usize;
    let order = bg.order();
    if bg.elements.len() != cells * cells || bg.elements.iter().any(|e| e.family != Family::Quadrilateral) {
        return Err(BenchError::Config("area sampling needs an undeformed Cartesian quadrilateral background".into()));
    }
    let re = ReferenceElement::<f64>::new(Family::Quadrilateral, order)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..samples {
        let x = Point2::new(rng.random_range(d.min.x..d.max.x), rng.random_range(d.min.y..d.max.y));
        let i = (((x.x - d.min.x) / bg.h) as usize).min(cells - 1);
        let j = (((x.y - d.min.y) / bg.h) as usize).min(cells - 1);
        let lo = Point2::new(d.min.x + i as f64 * bg.h, d.min.y + j as f64 * bg.h);
        let r = Point2::new(2.0 * (x.x - lo.x) / bg.h - 1.0, 2.0 * (x.y - lo.y) / bg.h - 1.0);
        if field.on_element(bg, &re, j * cells + i).value(r) < 0.0 {
            hits += 1;
        }
    }
    let box_area = d.width() * d.height();
    let p = hits as f64 / samples as f64;
    Ok(AreaCheck {
        mesh_area: side_area(mesh, Side::Minus)?,
        sampled_area: p * box_area,
        sigma: box_area * (p * (1.0 - p) / samples as f64).sqrt(),
        samples,
    })
}
