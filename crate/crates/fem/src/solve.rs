use cdfem::mesh::ConformingMesh;
use cdfem::Point2;
use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Llt;
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Col, Side as FaerSide};

use crate::{DofField, FemError, LinearSystem, SparseMatrix};

/// Sparse Cholesky factorization of a symmetric positive definite matrix.
pub struct Cholesky {
    llt: Llt<usize, f64>,
    n: usize,
}

impl std::fmt::Debug for Cholesky {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Cholesky").field("n", &self.n).finish_non_exhaustive()
    }
}

impl Cholesky {
    pub fn factor(a: &SparseMatrix) -> Result<Self, FemError> {
        if a.n == 0 {
            return Err(FemError::Singular("empty system".into()));
        }
        // symmetric, so the row-compressed arrays are also a valid column form
        let symbolic = SymbolicSparseColMatRef::new_checked(a.n, a.n, &a.row_ptr, None, &a.cols);
        let mat = SparseColMatRef::new(symbolic, &a.vals);
        let llt = mat.sp_cholesky(FaerSide::Lower).map_err(|e| FemError::Singular(format!("{e:?}")))?;
        Ok(Self { llt, n: a.n })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = Col::from_fn(self.n, |i| b[i]);
        self.llt.solve_in_place(x.as_mut());
        x.iter().copied().collect()
    }

    pub fn dim(&self) -> usize {
        self.n
    }
}

/// Solved system: the nodal field, the reduced matrix on the free dofs
/// with its factorization, and the relative residual of the reduced solve.
#[derive(Debug)]
pub struct Solution<'m> {
    pub field: DofField<'m>,
    pub reduced: SparseMatrix,
    pub factor: Cholesky,
    pub residual: f64,
}

/// Nodes of the system on the mesh's domain box.
pub fn box_boundary_nodes(mesh: &ConformingMesh<f64>, system: &LinearSystem) -> Vec<usize> {
    let Some(d) = mesh.domain else { return Vec::new() };
    let tol = 1e-12 * d.width().max(d.height());
    system.block_node.iter().copied().filter(|&n| d.on_boundary(mesh.nodes[n], tol)).collect()
}

/// Prescribes `g` at `nodes`, replacing earlier records of the same dofs.
pub fn constrain(system: &mut LinearSystem, mesh: &ConformingMesh<f64>, nodes: &[usize], g: impl Fn(Point2<f64>) -> [f64; 2]) {
    let c = system.components;
    let mut records: std::collections::BTreeMap<usize, f64> = system.constrained.iter().copied().collect();
    for &n in nodes {
        let Some(b) = system.node_block[n] else { continue };
        let v = g(mesh.nodes[n]);
        for k in 0..c {
            records.insert(b * c + k, v[k]);
        }
    }
    system.constrained = records.into_iter().collect();
}

/// Symmetric elimination of the constrained dofs and a direct solve of
/// `K_FF u_F = b_F - K_FC g_C`.
pub fn solve<'m>(mesh: &'m ConformingMesh<f64>, system: &LinearSystem) -> Result<Solution<'m>, FemError> {
    let n = system.ndof();
    let mut fixed = vec![None; n];
    for &(d, v) in &system.constrained {
        fixed[d] = Some(v);
    }
    let mut free = vec![None; n];
    let mut count = 0;
    for (d, f) in fixed.iter().enumerate() {
        if f.is_none() {
            free[d] = Some(count);
            count += 1;
        }
    }
    let g: Vec<f64> = fixed.iter().map(|f| f.unwrap_or(0.0)).collect();
    let kg = system.matrix.matvec(&g);
    let rhs: Vec<f64> = (0..n).filter(|&d| free[d].is_some()).map(|d| system.rhs[d] - kg[d]).collect();
    let reduced = system.matrix.restrict(&free);
    let factor = Cholesky::factor(&reduced)?;
    let uf = factor.solve(&rhs);
    if uf.iter().any(|v| !v.is_finite()) {
        return Err(FemError::Singular("non-finite solution".into()));
    }
    let r = reduced.matvec(&uf);
    let num = r.iter().zip(&rhs).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let den = rhs.iter().map(|b| b * b).sum::<f64>().sqrt();
    let residual = if den > 0.0 { num / den } else { num };

    let c = system.components;
    let mut field = DofField::zeros(mesh, c);
    for (d, f) in free.iter().enumerate() {
        let v = match f {
            Some(k) => uf[*k],
            None => g[d],
        };
        field.values[system.block_node[d / c] * c + d % c] = v;
    }
    Ok(Solution { field, reduced, factor, residual })
}

/// Strong Dirichlet data `g` on every node of the domain box, then [`solve`].
pub fn apply_dirichlet_and_solve<'m>(
    mesh: &'m ConformingMesh<f64>,
    system: &mut LinearSystem,
    g: impl Fn(Point2<f64>) -> [f64; 2],
) -> Result<Solution<'m>, FemError> {
    let nodes = box_boundary_nodes(mesh, system);
    constrain(system, mesh, &nodes, g);
    solve(mesh, system)
}
