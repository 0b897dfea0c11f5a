use std::collections::HashMap;

use cdfem::mesh::ConformingMesh;
use cdfem::refelem::{quadrature, Family, ReferenceElement, ShapeValues};
use cdfem::Point2;
use rayon::prelude::*;

use crate::solve::{solve, Solution};
use crate::{DofField, FemError, Materials, SparseMatrix};

/// Quadrature degree `scale * m + offset` for an element of order `m`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuadratureDegree {
    pub scale: usize,
    pub offset: usize,
}

impl QuadratureDegree {
    pub const ASSEMBLY: Self = Self { scale: 2, offset: 2 };
    pub const ERROR: Self = Self { scale: 2, offset: 6 };

    pub fn of(&self, order: usize) -> usize {
        self.scale * order + self.offset
    }
}

impl Default for QuadratureDegree {
    fn default() -> Self {
        Self::ASSEMBLY
    }
}

/// Shape values of one element type at the points of a quadrature rule.
pub(crate) struct Basis {
    pub weights: Vec<f64>,
    pub shapes: Vec<ShapeValues<f64>>,
}

#[derive(Default)]
pub(crate) struct BasisCache(HashMap<(Family, usize, usize), Basis>);

impl BasisCache {
    pub fn for_mesh(mesh: &ConformingMesh<f64>, degree: QuadratureDegree) -> Result<Self, FemError> {
        let mut cache = Self::default();
        for el in &mesh.elements {
            let key = (el.family, el.order, degree.of(el.order));
            if cache.0.contains_key(&key) {
                continue;
            }
            let re = ReferenceElement::<f64>::new(el.family, el.order)?;
            let rule = quadrature::<f64>(el.family, key.2)?;
            let shapes = rule.points.iter().map(|&p| re.eval(p)).collect();
            cache.0.insert(key, Basis { weights: rule.weights.clone(), shapes });
        }
        Ok(cache)
    }

    pub fn get(&self, family: Family, order: usize, degree: QuadratureDegree) -> &Basis {
        &self.0[&(family, order, degree.of(order))]
    }
}

/// Physical point, physical shape gradients and Jacobian determinant.
pub(crate) fn map_point(coords: &[Point2<f64>], sv: &ShapeValues<f64>, grads: &mut Vec<[f64; 2]>) -> (Point2<f64>, f64) {
    let mut x = Point2::zero();
    let mut j = [[0.0; 2]; 2];
    for ((c, n), g) in coords.iter().zip(&sv.values).zip(&sv.gradients) {
        x += *c * *n;
        j[0][0] += c.x * g[0];
        j[0][1] += c.x * g[1];
        j[1][0] += c.y * g[0];
        j[1][1] += c.y * g[1];
    }
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    grads.clear();
    for g in &sv.gradients {
        // J^{-T} g
        grads.push([(j[1][1] * g[0] - j[1][0] * g[1]) / det, (-j[0][1] * g[0] + j[0][0] * g[1]) / det]);
    }
    (x, det)
}

/// Assembled system over the nodes of the active elements. Unknowns are
/// numbered block-wise: block `k` holds the components of mesh node
/// `block_node[k]` at dofs `k * components ..`.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    pub components: usize,
    pub node_block: Vec<Option<usize>>,
    pub block_node: Vec<usize>,
    /// Prescribed `(dof, value)` pairs.
    pub constrained: Vec<(usize, f64)>,
    /// Elements that contributed.
    pub active: Vec<usize>,
}

impl LinearSystem {
    pub fn ndof(&self) -> usize {
        self.rhs.len()
    }

    fn empty(mesh: &ConformingMesh<f64>, active: Vec<usize>, components: usize) -> Self {
        let mut node_block = vec![None; mesh.nodes.len()];
        for &e in &active {
            for &n in &mesh.elements[e].nodes {
                node_block[n] = Some(0);
            }
        }
        let mut block_node = Vec::new();
        for (n, b) in node_block.iter_mut().enumerate() {
            if b.is_some() {
                *b = Some(block_node.len());
                block_node.push(n);
            }
        }
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); block_node.len()];
        for &e in &active {
            let blocks: Vec<usize> = mesh.elements[e].nodes.iter().map(|&n| node_block[n].expect("active")).collect();
            for &a in &blocks {
                adj[a].extend_from_slice(&blocks);
            }
        }
        let mut rows = Vec::with_capacity(block_node.len() * components);
        for mut a in adj {
            a.sort_unstable();
            a.dedup();
            for _ in 0..components {
                rows.push(a.iter().flat_map(|&b| (0..components).map(move |c| b * components + c)).collect());
            }
        }
        let matrix = SparseMatrix::from_pattern(rows);
        let rhs = vec![0.0; matrix.n];
        Self { matrix, rhs, components, node_block, block_node, constrained: Vec::new(), active }
    }

    fn element_dofs(&self, mesh: &ConformingMesh<f64>, e: usize) -> Vec<usize> {
        let c = self.components;
        mesh.elements[e]
            .nodes
            .iter()
            .flat_map(|&n| {
                let b = self.node_block[n].expect("active node");
                (0..c).map(move |k| b * c + k)
            })
            .collect()
    }

    /// Energy `uᵀ K u` of a nodal field on the system's nodes.
    pub fn energy(&self, field: &DofField<'_>) -> f64 {
        let u = self.gather(field);
        self.matrix.matvec(&u).iter().zip(&u).map(|(a, b)| a * b).sum()
    }

    /// System vector of a nodal field.
    pub fn gather(&self, field: &DofField<'_>) -> Vec<f64> {
        let c = self.components;
        let mut u = vec![0.0; self.ndof()];
        for (b, &n) in self.block_node.iter().enumerate() {
            u[b * c..(b + 1) * c].copy_from_slice(field.node(n));
        }
        u
    }
}

type Local = (Vec<f64>, Vec<f64>);

const CHUNK: usize = 256;

/// Element loop: local matrices in parallel per chunk, accumulated in
/// element order so the result does not depend on scheduling.
fn assemble<K>(mesh: &ConformingMesh<f64>, system: &mut LinearSystem, parallel: bool, kernel: K) -> Result<(), FemError>
where
    K: Fn(usize) -> Result<Local, FemError> + Sync,
{
    let active = system.active.clone();
    for chunk in active.chunks(CHUNK) {
        let locals: Vec<Result<Local, FemError>> = if parallel {
            chunk.par_iter().map(|&e| kernel(e)).collect()
        } else {
            chunk.iter().map(|&e| kernel(e)).collect()
        };
        for (&e, local) in chunk.iter().zip(locals) {
            let (k, f) = local?;
            let dofs = system.element_dofs(mesh, e);
            let n = dofs.len();
            for (i, &gi) in dofs.iter().enumerate() {
                system.rhs[gi] += f[i];
                for (j, &gj) in dofs.iter().enumerate() {
                    system.matrix.add(gi, gj, k[i * n + j]);
                }
            }
        }
    }
    Ok(())
}

/// Mass matrix and load `b_i = ∫ N_i f dΩ` over all elements.
pub fn assemble_mass(mesh: &ConformingMesh<f64>, f: &(dyn Fn(Point2<f64>) -> f64 + Sync)) -> Result<LinearSystem, FemError> {
    let degree = QuadratureDegree::ASSEMBLY;
    let cache = BasisCache::for_mesh(mesh, degree)?;
    let mut system = LinearSystem::empty(mesh, (0..mesh.elements.len()).collect(), 1);
    assemble(mesh, &mut system, true, |e| {
        let el = &mesh.elements[e];
        let basis = cache.get(el.family, el.order, degree);
        let coords = mesh.element_coords(e);
        let n = coords.len();
        let mut k = vec![0.0; n * n];
        let mut b = vec![0.0; n];
        let mut grads = Vec::with_capacity(n);
        for (sv, w) in basis.shapes.iter().zip(&basis.weights) {
            let (x, det) = map_point(&coords, sv, &mut grads);
            if det <= 0.0 {
                return Err(FemError::Jacobian { element: e, det });
            }
            let wd = w * det;
            let fx = f(x) * wd;
            for i in 0..n {
                let ni = sv.values[i] * wd;
                b[i] += sv.values[i] * fx;
                for j in 0..n {
                    k[i * n + j] += ni * sv.values[j];
                }
            }
        }
        Ok((k, b))
    })?;
    Ok(system)
}

/// L2 projection of `f` onto the continuous Lagrange space of the mesh.
pub fn l2_project<'m>(mesh: &'m ConformingMesh<f64>, f: &(dyn Fn(Point2<f64>) -> f64 + Sync)) -> Result<DofField<'m>, FemError> {
    let system = assemble_mass(mesh, f)?;
    let Solution { field, .. } = solve(mesh, &system)?;
    Ok(field)
}

/// Plane-strain stiffness with zero body force, integrated at degree
/// `2m + 2`. Elements on a side without a material are skipped.
pub fn assemble_elasticity(mesh: &ConformingMesh<f64>, materials: &Materials) -> Result<LinearSystem, FemError> {
    assemble_elasticity_with(mesh, materials, QuadratureDegree::ASSEMBLY, true)
}

pub fn assemble_elasticity_with(
    mesh: &ConformingMesh<f64>,
    materials: &Materials,
    degree: QuadratureDegree,
    parallel: bool,
) -> Result<LinearSystem, FemError> {
    let active: Vec<usize> = (0..mesh.elements.len()).filter(|&e| materials.get(mesh.elements[e].side).is_some()).collect();
    if active.is_empty() {
        return Err(FemError::Material("no element has a material".into()));
    }
    let cache = BasisCache::for_mesh(mesh, degree)?;
    let mut system = LinearSystem::empty(mesh, active, 2);
    assemble(mesh, &mut system, parallel, |e| {
        let el = &mesh.elements[e];
        let c = materials.get(el.side).expect("active element").stiffness();
        let basis = cache.get(el.family, el.order, degree);
        let coords = mesh.element_coords(e);
        let n = coords.len();
        let nd = 2 * n;
        let mut k = vec![0.0; nd * nd];
        let mut grads = Vec::with_capacity(n);
        for (sv, w) in basis.shapes.iter().zip(&basis.weights) {
            let (_, det) = map_point(&coords, sv, &mut grads);
            if det <= 0.0 {
                return Err(FemError::Jacobian { element: e, det });
            }
            let wd = w * det;
            for i in 0..n {
                let [ax, ay] = grads[i];
                // rows of C B_i: columns for u_x and u_y of node i
                let cbx = [c[0][0] * ax + c[0][2] * ay, c[1][0] * ax + c[1][2] * ay, c[2][0] * ax + c[2][2] * ay];
                let cby = [c[0][1] * ay + c[0][2] * ax, c[1][1] * ay + c[1][2] * ax, c[2][1] * ay + c[2][2] * ax];
                for j in 0..n {
                    let [bx, by] = grads[j];
                    // B_j^T (C B_i), B_j = [[bx, 0], [0, by], [by, bx]]
                    let r = 2 * i * nd + 2 * j;
                    k[r] += wd * (bx * cbx[0] + by * cbx[2]);
                    k[r + 1] += wd * (by * cbx[1] + bx * cbx[2]);
                    k[r + nd] += wd * (bx * cby[0] + by * cby[2]);
                    k[r + nd + 1] += wd * (by * cby[1] + bx * cby[2]);
                }
            }
        }
        Ok((k, vec![0.0; nd]))
    })?;
    Ok(system)
}

/// Elements whose side carries a material.
pub(crate) fn material_elements(mesh: &ConformingMesh<f64>, materials: Option<&Materials>) -> Vec<usize> {
    (0..mesh.elements.len())
        .filter(|&e| materials.is_none_or(|m| m.get(mesh.elements[e].side).is_some()))
        .collect()
}
