//! Node placement of curved sub-elements: a straight isoparametric map plus
//! a blended deviation term `ψ(a) f(u(a))` driven by the interface.

use std::fmt;
use std::str::FromStr;

use crate::refelem::{line_shape, Family, ReferenceElement};
use crate::{Point2, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PsiVariant {
    /// Transfinite triangle blending with vertex-function parametrization.
    Solin,
    /// `ψ = λ1 + λ2`, `u = λ2 − λ1`; curves the other two edges.
    Ramp,
    /// Interior nodes from intersections of lines through boundary nodes.
    Lenoir,
    /// Quadrilateral ramp blending.
    BlendQ,
    /// Ramp weight on triangles with the collapsed parametrization.
    BlendOnT,
}

impl PsiVariant {
    /// Variant actually applied to a sub-cell of `family`.
    pub fn for_family(self, family: Family) -> Self {
        match family {
            Family::Quadrilateral => PsiVariant::BlendQ,
            _ if self == PsiVariant::BlendQ => PsiVariant::Solin,
            _ => self,
        }
    }
}

impl fmt::Display for PsiVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PsiVariant::Solin => "solin",
            PsiVariant::Ramp => "ramp",
            PsiVariant::Lenoir => "lenoir",
            PsiVariant::BlendQ => "blend_q",
            PsiVariant::BlendOnT => "blend",
        })
    }
}

impl FromStr for PsiVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "solin" => Ok(PsiVariant::Solin),
            "ramp" => Ok(PsiVariant::Ramp),
            "lenoir" => Ok(PsiVariant::Lenoir),
            "blend_q" => Ok(PsiVariant::BlendQ),
            "blend" | "blend_on_t" => Ok(PsiVariant::BlendOnT),
            _ => Err(format!("unknown mapping `{s}` (solin, lenoir, ramp, blend)")),
        }
    }
}

/// Deviation of the interface element from its chord at `u` in [-1, 1].
pub fn edge_deviation<T: Real>(interface: &[Point2<T>], u: T) -> Point2<T> {
    let m = interface.len() - 1;
    let (v, _) = line_shape(m, u);
    let mut p = Point2::zero();
    for (n, c) in v.iter().zip(interface) {
        p += *c * *n;
    }
    let two = T::lit(2.0);
    p - interface[0] * ((T::one() - u) / two) - interface[m] * ((T::one() + u) / two)
}

/// Interface point at `u`.
fn interface_point<T: Real>(interface: &[Point2<T>], u: T) -> Point2<T> {
    crate::refelem::line_map(interface, u).point
}

/// Blending weight and edge parameter of a triangle variant at barycentric
/// coordinates `(λ0, λ1, λ2)`; `None` where the formula is 0/0.
pub fn triangle_blend<T: Real>(variant: PsiVariant, l: [T; 3]) -> Option<(T, T)> {
    let (l1, l2) = (l[1], l[2]);
    let one = T::one();
    let two = T::lit(2.0);
    match variant {
        PsiVariant::Ramp => Some((l1 + l2, l2 - l1)),
        PsiVariant::BlendOnT => {
            let s = l1 + l2;
            (s > T::zero()).then(|| (s, (l2 - l1) / s))
        }
        _ => {
            let u = l2 - l1;
            let den = ((one - u) / two) * ((one + u) / two);
            (den > T::zero()).then(|| ((l1 * l2) / den, u))
        }
    }
}

/// Quadrilateral ramp `R = (1 + a)/2` and edge parameter `u = b`.
pub fn quad_blend<T: Real>(a: T, b: T) -> (T, T) {
    ((T::one() + a) / T::lit(2.0), b)
}

/// Node coordinates, in the parent's reference frame, of an order-`order`
/// sub-element on straight corners `corners` (counterclockwise, interface
/// on edge 1 from `corners[1]` to `corners[2]`). `interface` holds the
/// interface nodes in that direction; `None` gives the straight lattice.
pub fn map_subcell_nodes<T: Real>(
    re: &ReferenceElement<T>,
    corners: &[Point2<T>],
    interface: Option<&[Point2<T>]>,
    variant: PsiVariant,
) -> Vec<Point2<T>> {
    let family = re.family();
    let variant = variant.for_family(family);
    let lin = |a: Point2<T>| -> Point2<T> {
        match family {
            Family::Triangle => {
                corners[0] * (T::one() - a.x - a.y) + corners[1] * a.x + corners[2] * a.y
            }
            _ => {
                let q = T::lit(0.25);
                let (s, t) = (a.x, a.y);
                corners[0] * (q * (T::one() - s) * (T::one() - t))
                    + corners[1] * (q * (T::one() + s) * (T::one() - t))
                    + corners[2] * (q * (T::one() + s) * (T::one() + t))
                    + corners[3] * (q * (T::one() - s) * (T::one() + t))
            }
        }
    };
    let Some(iface) = interface else {
        return re.nodes().iter().map(|&a| lin(a)).collect();
    };
    let vertices = re.vertex_nodes();
    let mut out: Vec<Point2<T>> = re
        .nodes()
        .iter()
        .enumerate()
        .map(|(k, &a)| {
            let base = lin(a);
            if vertices.contains(&k) {
                return base;
            }
            let blend = match family {
                Family::Triangle => triangle_blend(variant, [T::one() - a.x - a.y, a.x, a.y]),
                _ => Some(quad_blend(a.x, a.y)),
            };
            match blend {
                Some((psi, u)) => base + edge_deviation(iface, u) * psi,
                None => base,
            }
        })
        .collect();
    if family == Family::Triangle && variant == PsiVariant::Lenoir {
        lenoir_interior(re, iface, &mut out);
    }
    snap_special_edge(re, iface, &mut out);
    out
}

/// Places the edge-1 nodes exactly on the interface.
fn snap_special_edge<T: Real>(re: &ReferenceElement<T>, iface: &[Point2<T>], out: &mut [Point2<T>]) {
    let m = re.order();
    let edge = re.edge_nodes(1);
    let same_order = iface.len() == m + 1;
    for (k, &n) in edge.iter().enumerate() {
        out[n] = if same_order {
            iface[k]
        } else {
            interface_point(iface, -T::one() + T::lit(2.0) * T::from_count(k) / T::from_count(m))
        };
    }
}

/// Interior nodes at the intersection of the two lattice lines that join a
/// straight edge to the curved edge. The third line family runs between the
/// straight edges and only enters when the other two are parallel.
fn lenoir_interior<T: Real>(re: &ReferenceElement<T>, iface: &[Point2<T>], out: &mut [Point2<T>]) {
    let m = re.order();
    snap_special_edge(re, iface, out);
    let at = |i: usize, j: usize| out[re.lattice_index(i, j).expect("lattice node")];
    let mut moved = Vec::new();
    for j in 1..m {
        for i in 1..m - j {
            let k = m - i - j;
            let l1 = (at(i, 0), at(i, m - i));
            let l2 = (at(0, j), at(m - j, j));
            let l0 = (at(m - k, 0), at(0, m - k));
            let p = intersect(l1, l2).or_else(|| {
                let pts: Vec<Point2<T>> = [intersect(l2, l0), intersect(l0, l1)].into_iter().flatten().collect();
                (!pts.is_empty()).then(|| pts.iter().fold(Point2::zero(), |a, &p| a + p) / T::from_count(pts.len()))
            });
            if let Some(p) = p {
                moved.push((re.lattice_index(i, j).expect("lattice node"), p));
            }
        }
    }
    for (n, p) in moved {
        out[n] = p;
    }
}

fn intersect<T: Real>(a: (Point2<T>, Point2<T>), b: (Point2<T>, Point2<T>)) -> Option<Point2<T>> {
    let d1 = a.1 - a.0;
    let d2 = b.1 - b.0;
    let den = d1.cross(d2);
    if den.abs() <= T::epsilon() * d1.norm() * d2.norm() {
        return None;
    }
    let t = (b.0 - a.0).cross(d2) / den;
    Some(a.0 + d1 * t)
}
