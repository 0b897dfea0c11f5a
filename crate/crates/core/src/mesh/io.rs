//! Native text mesh format.
//!
//! ```text
//! cdfem-mesh 1
//! domain <xmin> <ymin> <xmax> <ymax>
//! h <value>
//! nodes <count> <columns>
//! <x> <y> [<phi>]
//! elements <count>
//! <family> <order> <side> <parent> <topology> <psi> <n> <id>...
//! facets <count>
//! <order> <parent> <n> <id>...
//! end
//! ```
//!
//! `columns` is 2, or 3 when a level-set column is present. Unset element
//! tags are written as `-`. Reals use 17 significant digits so a write/read
//! cycle reproduces coordinates exactly. Reference coordinates of
//! conforming elements are not stored.

use std::fmt::LowerExp;
use std::io::{BufRead, Write};
use std::str::FromStr;

use thiserror::Error;

use super::{BackgroundMesh, ConformingElement, ConformingMesh, Element, InterfaceFacet, MeshError, Side};
use crate::decompose::{PsiVariant, TopologyCode};
use crate::refelem::Family;
use crate::{BoundingBox, Point2, Real};

const MAGIC: &str = "cdfem-mesh";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct NativeElement {
    pub family: Family,
    pub order: usize,
    pub side: Option<Side>,
    pub parent: Option<usize>,
    pub topology: Option<TopologyCode>,
    pub psi: Option<PsiVariant>,
    pub nodes: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NativeFacet {
    pub order: usize,
    pub parent: usize,
    pub nodes: Vec<usize>,
}

/// Contents of a native mesh file.
#[derive(Clone, Debug, PartialEq)]
pub struct NativeMesh<T = f64> {
    pub domain: Option<BoundingBox<T>>,
    pub h: Option<T>,
    pub nodes: Vec<Point2<T>>,
    pub phi: Option<Vec<T>>,
    pub elements: Vec<NativeElement>,
    pub facets: Vec<NativeFacet>,
}

fn real<T: LowerExp>(v: T) -> String {
    format!("{v:.16e}")
}

fn opt<D: std::fmt::Display>(v: Option<D>) -> String {
    v.map_or_else(|| "-".to_string(), |d| d.to_string())
}

impl<T: Real> NativeMesh<T> {
    pub fn from_background(mesh: &BackgroundMesh<T>, phi: Option<&[T]>) -> Self {
        Self {
            domain: Some(mesh.domain),
            h: Some(mesh.h),
            nodes: mesh.nodes.clone(),
            phi: phi.map(<[T]>::to_vec),
            elements: mesh
                .elements
                .iter()
                .map(|e| NativeElement {
                    family: e.family,
                    order: e.order,
                    side: None,
                    parent: None,
                    topology: None,
                    psi: None,
                    nodes: e.nodes.clone(),
                })
                .collect(),
            facets: vec![],
        }
    }

    pub fn from_conforming(mesh: &ConformingMesh<T>) -> Self {
        Self {
            domain: mesh.domain,
            h: None,
            nodes: mesh.nodes.clone(),
            phi: None,
            elements: mesh
                .elements
                .iter()
                .map(|e| NativeElement {
                    family: e.family,
                    order: e.order,
                    side: Some(e.side),
                    parent: Some(e.parent),
                    topology: e.topology,
                    psi: e.psi,
                    nodes: e.nodes.clone(),
                })
                .collect(),
            facets: mesh
                .facets
                .iter()
                .map(|f| NativeFacet { order: f.order, parent: f.parent, nodes: f.nodes.clone() })
                .collect(),
        }
    }

    /// Rebuilds a background mesh; `h` defaults to the square root of the
    /// mean element area of the bounding box.
    pub fn to_background(&self) -> Result<BackgroundMesh<T>, MeshError> {
        let domain = self.domain.unwrap_or_else(|| bounding_box(&self.nodes));
        let h = self.h.unwrap_or_else(|| {
            (domain.width() * domain.height() / T::from_count(self.elements.len().max(1))).sqrt()
        });
        let elements = self
            .elements
            .iter()
            .map(|e| Element { family: e.family, order: e.order, nodes: e.nodes.clone() })
            .collect();
        BackgroundMesh::new(self.nodes.clone(), elements, domain, h)
    }

    /// Rebuilds a conforming mesh. Reference coordinates are left empty and
    /// missing tags default to the plus side and parent 0.
    pub fn to_conforming(&self) -> ConformingMesh<T> {
        ConformingMesh {
            nodes: self.nodes.clone(),
            elements: self
                .elements
                .iter()
                .map(|e| ConformingElement {
                    family: e.family,
                    order: e.order,
                    nodes: e.nodes.clone(),
                    side: e.side.unwrap_or(Side::Plus),
                    parent: e.parent.unwrap_or(0),
                    parent_family: e.topology.map_or(e.family, |t| t.family),
                    topology: e.topology,
                    psi: e.psi,
                    r_nodes: vec![],
                })
                .collect(),
            facets: self
                .facets
                .iter()
                .map(|f| InterfaceFacet { order: f.order, parent: f.parent, nodes: f.nodes.clone(), r_nodes: vec![] })
                .collect(),
            domain: self.domain,
        }
    }

    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{MAGIC} {VERSION}")?;
        if let Some(d) = self.domain {
            writeln!(w, "domain {} {} {} {}", real(d.min.x), real(d.min.y), real(d.max.x), real(d.max.y))?;
        }
        if let Some(h) = self.h {
            writeln!(w, "h {}", real(h))?;
        }
        let cols = if self.phi.is_some() { 3 } else { 2 };
        writeln!(w, "nodes {} {cols}", self.nodes.len())?;
        for (i, p) in self.nodes.iter().enumerate() {
            match &self.phi {
                Some(phi) => writeln!(w, "{} {} {}", real(p.x), real(p.y), real(phi[i]))?,
                None => writeln!(w, "{} {}", real(p.x), real(p.y))?,
            }
        }
        writeln!(w, "elements {}", self.elements.len())?;
        for e in &self.elements {
            write!(
                w,
                "{} {} {} {} {} {} {}",
                e.family,
                e.order,
                opt(e.side),
                opt(e.parent),
                opt(e.topology),
                opt(e.psi),
                e.nodes.len()
            )?;
            for n in &e.nodes {
                write!(w, " {n}")?;
            }
            writeln!(w)?;
        }
        writeln!(w, "facets {}", self.facets.len())?;
        for f in &self.facets {
            write!(w, "{} {} {}", f.order, f.parent, f.nodes.len())?;
            for n in &f.nodes {
                write!(w, " {n}")?;
            }
            writeln!(w)?;
        }
        writeln!(w, "end")
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self, IoError> {
        let mut lines = r.lines().enumerate().filter_map(|(i, l)| match l {
            Ok(s) if s.trim().is_empty() || s.trim_start().starts_with('#') => None,
            other => Some((i + 1, other)),
        });
        let mut next = |what: &str| -> Result<(usize, String), IoError> {
            match lines.next() {
                Some((n, Ok(s))) => Ok((n, s)),
                Some((_, Err(e))) => Err(e.into()),
                None => Err(IoError::Parse { line: 0, msg: format!("unexpected end of file, expected {what}") }),
            }
        };
        let (n, header) = next("header")?;
        let mut it = header.split_whitespace();
        if it.next() != Some(MAGIC) || it.next().and_then(|v| v.parse::<u32>().ok()) != Some(VERSION) {
            return Err(IoError::Parse { line: n, msg: format!("expected `{MAGIC} {VERSION}`") });
        }
        let mut out = NativeMesh { domain: None, h: None, nodes: vec![], phi: None, elements: vec![], facets: vec![] };
        loop {
            let (n, line) = next("section")?;
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks[0] {
                "domain" => {
                    let v = parse_all::<T>(n, &toks[1..], 4)?;
                    out.domain = Some(BoundingBox::new(Point2::new(v[0], v[1]), Point2::new(v[2], v[3])));
                }
                "h" => out.h = Some(parse_all::<T>(n, &toks[1..], 1)?[0]),
                "nodes" => {
                    let v = parse_all::<usize>(n, &toks[1..], 2)?;
                    let (count, cols) = (v[0], v[1]);
                    if cols != 2 && cols != 3 {
                        return Err(IoError::Parse { line: n, msg: format!("unsupported column count {cols}") });
                    }
                    let mut phi = Vec::new();
                    for _ in 0..count {
                        let (n, l) = next("node")?;
                        let t: Vec<&str> = l.split_whitespace().collect();
                        let v = parse_all::<T>(n, &t, cols)?;
                        out.nodes.push(Point2::new(v[0], v[1]));
                        if cols == 3 {
                            phi.push(v[2]);
                        }
                    }
                    if cols == 3 {
                        out.phi = Some(phi);
                    }
                }
                "elements" => {
                    let count = parse_all::<usize>(n, &toks[1..], 1)?[0];
                    for _ in 0..count {
                        let (n, l) = next("element")?;
                        out.elements.push(parse_element(n, &l)?);
                    }
                }
                "facets" => {
                    let count = parse_all::<usize>(n, &toks[1..], 1)?[0];
                    for _ in 0..count {
                        let (n, l) = next("facet")?;
                        let t: Vec<&str> = l.split_whitespace().collect();
                        if t.len() < 3 {
                            return Err(IoError::Parse { line: n, msg: "truncated facet".into() });
                        }
                        let head = parse_all::<usize>(n, &t[..3], 3)?;
                        let nodes = parse_all::<usize>(n, &t[3..], head[2])?;
                        out.facets.push(NativeFacet { order: head[0], parent: head[1], nodes });
                    }
                }
                "end" => break,
                other => return Err(IoError::Parse { line: n, msg: format!("unknown section `{other}`") }),
            }
        }
        let nn = out.nodes.len();
        for e in out.elements.iter().map(|e| &e.nodes).chain(out.facets.iter().map(|f| &f.nodes)) {
            if let Some(&bad) = e.iter().find(|&&i| i >= nn) {
                return Err(IoError::Parse { line: 0, msg: format!("node id {bad} out of range") });
            }
        }
        Ok(out)
    }
}

fn parse_element(n: usize, l: &str) -> Result<NativeElement, IoError> {
    let t: Vec<&str> = l.split_whitespace().collect();
    let err = |msg: String| IoError::Parse { line: n, msg };
    if t.len() < 7 {
        return Err(err("truncated element".into()));
    }
    let family: Family = t[0].parse().map_err(|e| err(format!("{e}")))?;
    let order = parse_all::<usize>(n, &t[1..2], 1)?[0];
    let side = tag(t[2], |s| s.parse::<Side>()).map_err(err)?;
    let parent = tag(t[3], |s| s.parse::<usize>().map_err(|e| e.to_string())).map_err(err)?;
    let topology = tag(t[4], |s| s.parse::<TopologyCode>().map_err(|e| e.to_string())).map_err(err)?;
    let psi = tag(t[5], |s| s.parse::<PsiVariant>().map_err(|e| e.to_string())).map_err(err)?;
    let count = parse_all::<usize>(n, &t[6..7], 1)?[0];
    let nodes = parse_all::<usize>(n, &t[7..], count)?;
    Ok(NativeElement { family, order, side, parent, topology, psi, nodes })
}

fn tag<V>(s: &str, f: impl Fn(&str) -> Result<V, String>) -> Result<Option<V>, String> {
    if s == "-" {
        Ok(None)
    } else {
        f(s).map(Some)
    }
}

fn parse_all<V: FromStr>(line: usize, toks: &[&str], count: usize) -> Result<Vec<V>, IoError> {
    if toks.len() != count {
        return Err(IoError::Parse { line, msg: format!("expected {count} values, found {}", toks.len()) });
    }
    toks.iter()
        .map(|t| t.parse::<V>().map_err(|_| IoError::Parse { line, msg: format!("cannot parse `{t}`") }))
        .collect()
}

fn bounding_box<T: Real>(pts: &[Point2<T>]) -> BoundingBox<T> {
    let mut lo = Point2::new(T::infinity(), T::infinity());
    let mut hi = Point2::new(T::neg_infinity(), T::neg_infinity());
    for p in pts {
        lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    BoundingBox::new(lo, hi)
}
