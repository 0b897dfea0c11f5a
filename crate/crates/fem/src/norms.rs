use cdfem::mesh::{ConformingMesh, Side};
use cdfem::Point2;
use rayon::prelude::*;

use crate::assembly::{map_point, material_elements, BasisCache, QuadratureDegree};
use crate::{DofField, ExactSolution, FemError, Materials};

/// Relative global errors, with the absolute errors and exact norms they
/// come from.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ErrorNorms {
    pub l2: f64,
    pub he: f64,
    pub abs_l2: f64,
    pub abs_he: f64,
    pub exact_l2: f64,
    pub exact_he: f64,
}

/// `∫ f dΩ` over all elements at the error-norm quadrature degree.
pub fn integrate(mesh: &ConformingMesh<f64>, f: &(dyn Fn(Point2<f64>, Side) -> f64 + Sync)) -> Result<f64, FemError> {
    let degree = QuadratureDegree::ERROR;
    let cache = BasisCache::for_mesh(mesh, degree)?;
    let parts: Result<Vec<f64>, FemError> = (0..mesh.elements.len())
        .into_par_iter()
        .map(|e| {
            let el = &mesh.elements[e];
            let basis = cache.get(el.family, el.order, degree);
            let coords = mesh.element_coords(e);
            let mut grads = Vec::new();
            let mut s = 0.0;
            for (sv, w) in basis.shapes.iter().zip(&basis.weights) {
                let (x, det) = map_point(&coords, sv, &mut grads);
                s += w * det * f(x, el.side);
            }
            Ok(s)
        })
        .collect();
    Ok(parts?.iter().sum())
}

/// `‖u - u^h‖ / ‖u‖` in L2 and in the energy norm. With materials the
/// energy norm is `∫ (ε - ε^h)ᵀ C (ε - ε^h)` over elements whose side has a
/// material; without, it is the L2 norm of the gradient error over all
/// elements.
pub fn error_norms(field: &DofField<'_>, exact: &dyn ExactSolution, materials: Option<&Materials>) -> Result<ErrorNorms, FemError> {
    let mesh = field.mesh;
    let nc = field.components;
    if exact.components() != nc {
        return Err(FemError::Parameter(format!("{} exact components for a {nc}-component field", exact.components())));
    }
    let degree = QuadratureDegree::ERROR;
    let cache = BasisCache::for_mesh(mesh, degree)?;
    let elements = material_elements(mesh, materials);
    let parts: Result<Vec<[f64; 4]>, FemError> = elements
        .par_iter()
        .map(|&e| {
            let el = &mesh.elements[e];
            let basis = cache.get(el.family, el.order, degree);
            let coords = mesh.element_coords(e);
            let c = materials.and_then(|m| m.get(el.side)).map(|m| m.stiffness());
            let mut grads = Vec::new();
            let mut acc = [0.0; 4];
            for (sv, w) in basis.shapes.iter().zip(&basis.weights) {
                let (x, det) = map_point(&coords, sv, &mut grads);
                let ex = exact.eval(x, el.side)?;
                let mut uh = [0.0; 2];
                let mut gh = [[0.0; 2]; 2];
                for (k, &n) in el.nodes.iter().enumerate() {
                    for i in 0..nc {
                        let v = field.values[n * nc + i];
                        uh[i] += v * sv.values[k];
                        gh[i][0] += v * grads[k][0];
                        gh[i][1] += v * grads[k][1];
                    }
                }
                let wd = w * det;
                for i in 0..nc {
                    acc[0] += wd * (ex.value[i] - uh[i]).powi(2);
                    acc[2] += wd * ex.value[i].powi(2);
                }
                match c {
                    Some(c) if nc == 2 => {
                        let e_ex = ex.strain();
                        let e_h = [gh[0][0], gh[1][1], gh[0][1] + gh[1][0]];
                        let d = [e_ex[0] - e_h[0], e_ex[1] - e_h[1], e_ex[2] - e_h[2]];
                        acc[1] += wd * quad_form(&c, &d);
                        acc[3] += wd * quad_form(&c, &e_ex);
                    }
                    _ => {
                        for i in 0..nc {
                            for j in 0..2 {
                                acc[1] += wd * (ex.grad[i][j] - gh[i][j]).powi(2);
                                acc[3] += wd * ex.grad[i][j].powi(2);
                            }
                        }
                    }
                }
            }
            Ok(acc)
        })
        .collect();
    let mut sum = [0.0; 4];
    for p in parts? {
        for k in 0..4 {
            sum[k] += p[k];
        }
    }
    let [el2, ehe, ul2, uhe] = sum.map(f64::sqrt);
    if ul2 == 0.0 || uhe == 0.0 {
        return Err(FemError::ZeroNorm);
    }
    Ok(ErrorNorms { l2: el2 / ul2, he: ehe / uhe, abs_l2: el2, abs_he: ehe, exact_l2: ul2, exact_he: uhe })
}

fn quad_form(c: &[[f64; 3]; 3], d: &[f64; 3]) -> f64 {
    (0..3).map(|i| d[i] * (0..3).map(|j| c[i][j] * d[j]).sum::<f64>()).sum()
}
