//! Nodal level-set fields, element-local evaluation and cut detection.

mod cut;
pub mod shapes;

use crate::mesh::BackgroundMesh;
use crate::refelem::{Family, ReferenceElement};
use crate::{Point2, Real};

pub use cut::{classify_cut, scan_segment, CutReport, EdgeCut, SegmentScan, Validity};
pub(crate) use cut::validity_of;
#[doc(hidden)]
pub use cut::dense_sign_changes;
pub use shapes::Shape;

/// Default number of sample points between adjacent element nodes.
pub const DEFAULT_GRID_SAMPLES: usize = 3;

/// Relative threshold below which a nodal value is snapped to zero.
pub const NODE_TOL_FACTOR: f64 = 1e-10;

/// Nodal values `φ(x_n)` of a level-set function.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelSetField<T = f64> {
    values: Vec<T>,
    node_tol: T,
}

impl<T: Real> LevelSetField<T> {
    /// Takes nodal values, snapping those with `|φ| <= 1e-10 max|φ|` to zero.
    pub fn from_nodal(mut values: Vec<T>) -> Self {
        let scale = values.iter().fold(T::zero(), |a, v| a.max(v.abs()));
        let node_tol = T::lit(NODE_TOL_FACTOR) * scale;
        for v in &mut values {
            if v.abs() <= node_tol {
                *v = T::zero();
            }
        }
        Self { values, node_tol }
    }

    /// Samples `f` at the mesh nodes.
    pub fn from_fn(mesh: &BackgroundMesh<T>, f: impl Fn(Point2<T>) -> T) -> Self {
        Self::from_nodal(mesh.nodes.iter().map(|&p| f(p)).collect())
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn node_tol(&self) -> T {
        self.node_tol
    }

    /// Restriction to element `e` of `mesh`.
    pub fn on_element<'a>(
        &self,
        mesh: &BackgroundMesh<T>,
        re: &'a ReferenceElement<T>,
        e: usize,
    ) -> ElementField<'a, T> {
        let el = &mesh.elements[e];
        assert_eq!((el.family, el.order), (re.family(), re.order()), "reference element mismatch");
        ElementField { re, values: el.nodes.iter().map(|&n| self.values[n]).collect() }
    }
}

/// `φ^h` on one element, in its reference coordinates.
#[derive(Clone, Debug)]
pub struct ElementField<'a, T = f64> {
    pub re: &'a ReferenceElement<T>,
    pub values: Vec<T>,
}

impl<'a, T: Real> ElementField<'a, T> {
    pub fn new(re: &'a ReferenceElement<T>, values: Vec<T>) -> Self {
        assert_eq!(values.len(), re.node_count());
        Self { re, values }
    }

    pub fn family(&self) -> Family {
        self.re.family()
    }

    /// `φ^h(r)` and `∇_r φ^h(r)`.
    pub fn eval(&self, r: Point2<T>) -> (T, [T; 2]) {
        let sv = self.re.eval(r);
        let mut v = T::zero();
        let mut g = [T::zero(); 2];
        for ((n, d), &phi) in sv.values.iter().zip(&sv.gradients).zip(&self.values) {
            v += *n * phi;
            g[0] += d[0] * phi;
            g[1] += d[1] * phi;
        }
        (v, g)
    }

    pub fn value(&self, r: Point2<T>) -> T {
        self.eval(r).0
    }

    /// Reference-space sample points: `samples` extra points between
    /// adjacent nodes in each direction, nodes included.
    pub fn sample_grid(&self, samples: usize) -> Vec<Point2<T>> {
        sample_grid(self.family(), self.re.order() * (samples + 1))
    }

    /// Values on the sample grid. Exact nodal values are used where a
    /// sample coincides with a node.
    pub fn sample_values(&self, samples: usize) -> Vec<T> {
        let n = self.re.order() * (samples + 1);
        let step = samples + 1;
        let family = self.family();
        lattice(family, n)
            .into_iter()
            .map(|(i, j, p)| {
                let node = if i % step == 0 && j % step == 0 {
                    self.re.lattice_index(i / step, j / step)
                } else {
                    None
                };
                match node {
                    Some(k) => self.values[k],
                    None => self.value(p),
                }
            })
            .collect()
    }
}

fn lattice<T: Real>(family: Family, n: usize) -> Vec<(usize, usize, Point2<T>)> {
    let nn = T::from_count(n);
    let mut pts = Vec::new();
    match family {
        Family::Line => {
            for i in 0..=n {
                pts.push((i, 0, Point2::new(-T::one() + T::lit(2.0) * T::from_count(i) / nn, T::zero())));
            }
        }
        Family::Triangle => {
            for j in 0..=n {
                for i in 0..=n - j {
                    pts.push((i, j, Point2::new(T::from_count(i) / nn, T::from_count(j) / nn)));
                }
            }
        }
        Family::Quadrilateral => {
            for j in 0..=n {
                for i in 0..=n {
                    let a = -T::one() + T::lit(2.0) * T::from_count(i) / nn;
                    let b = -T::one() + T::lit(2.0) * T::from_count(j) / nn;
                    pts.push((i, j, Point2::new(a, b)));
                }
            }
        }
    }
    pts
}

/// Equispaced lattice with `n` intervals per direction on a reference domain.
pub fn sample_grid<T: Real>(family: Family, n: usize) -> Vec<Point2<T>> {
    lattice(family, n).into_iter().map(|(_, _, p)| p).collect()
}

/// `φ^h` and its reference gradient at `r` in element `e`.
pub fn eval_local<T: Real>(
    mesh: &BackgroundMesh<T>,
    field: &LevelSetField<T>,
    e: usize,
    r: Point2<T>,
) -> (T, [T; 2]) {
    let el = &mesh.elements[e];
    let re = ReferenceElement::new(el.family, el.order).expect("mesh element has a supported order");
    field.on_element(mesh, &re, e).eval(r)
}

/// Sign-change test `min φ^h · max φ^h < 0` over the sample grid with
/// `samples` points between adjacent nodes.
pub fn detect_cut<T: Real>(ef: &ElementField<'_, T>, samples: usize) -> bool {
    let v = ef.sample_values(samples);
    let lo = v.iter().copied().fold(T::infinity(), T::min);
    let hi = v.iter().copied().fold(T::neg_infinity(), T::max);
    lo * hi < T::zero()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_cartesian;
    use crate::BoundingBox;
    use rand::{Rng, SeedableRng};

    fn quad_field(m: usize, values: Vec<f64>) -> (ReferenceElement<f64>, Vec<f64>) {
        (ReferenceElement::new(Family::Quadrilateral, m).unwrap(), values)
    }

    #[test]
    fn constant_field() {
        let (re, v) = quad_field(3, vec![2.5; 16]);
        let ef = ElementField::new(&re, v);
        let (p, g) = ef.eval(Point2::new(0.3, -0.1));
        assert!((p - 2.5).abs() < 1e-13 && g[0].abs() < 1e-12 && g[1].abs() < 1e-12);
    }

    #[test]
    fn linear_field_on_identity_quad() {
        let re = ReferenceElement::<f64>::new(Family::Quadrilateral, 1).unwrap();
        let v = re.nodes().iter().map(|p| p.x).collect();
        let (_, g) = ElementField::new(&re, v).eval(Point2::new(0.2, 0.7));
        assert!((g[0] - 1.0).abs() < 1e-15 && g[1].abs() < 1e-15);
    }

    #[test]
    fn biquadratic_reproduces_circle_function() {
        let mesh = build_cartesian(BoundingBox::<f64>::symmetric_unit(), 4, Family::Quadrilateral, 2).unwrap();
        let f = |p: Point2<f64>| p.x * p.x + p.y * p.y - 0.16;
        let field = LevelSetField::from_fn(&mesh, f);
        let re = ReferenceElement::new(Family::Quadrilateral, 2).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let e = rng.random_range(0..mesh.elements.len());
            let r = Point2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let coords = mesh.element_coords(e);
            let x = crate::refelem::isoparametric_map(&re, &coords, r).point;
            let v = field.on_element(&mesh, &re, e).value(r);
            assert!((v - f(x)).abs() < 1e-13);
        }
    }

    #[test]
    fn eval_local_matches_element_field() {
        let mesh = build_cartesian(BoundingBox::<f64>::symmetric_unit(), 2, Family::Triangle, 2).unwrap();
        let field = LevelSetField::from_fn(&mesh, |p| p.x - 0.1 * p.y);
        let (v, _) = eval_local(&mesh, &field, 3, Point2::new(0.25, 0.25));
        let re = ReferenceElement::new(Family::Triangle, 2).unwrap();
        assert_eq!(v, field.on_element(&mesh, &re, 3).value(Point2::new(0.25, 0.25)));
    }

    #[test]
    fn snapping_uses_global_scale() {
        let f = LevelSetField::from_nodal(vec![1e-11f64, 2.0, -1.0, 3e-10]);
        assert_eq!(f.values(), &[0.0, 2.0, -1.0, 3e-10]);
        assert!((f.node_tol() - 2e-10).abs() < 1e-25);
    }

    #[test]
    fn detect_cut_examples() {
        let (re, v) = quad_field(1, vec![-1.0, -1.0, 1.0, 1.0]);
        assert!(detect_cut(&ElementField::new(&re, v), 3));
        for m in 1..=4 {
            let re = ReferenceElement::<f64>::new(Family::Triangle, m).unwrap();
            let n = re.node_count();
            assert!(!detect_cut(&ElementField::new(&re, vec![1.0; n]), 3));
        }
        // interior dip invisible to the nodal signs
        let re = ReferenceElement::<f64>::new(Family::Quadrilateral, 2).unwrap();
        let mut v = vec![0.1; 9];
        v[re.lattice_index(1, 1).unwrap()] = -1.0;
        assert!(v.iter().filter(|x| **x < 0.0).count() == 1);
        let ef = ElementField::new(&re, v);
        assert_eq!(ef.sample_grid(3).len(), 81);
        assert!(detect_cut(&ef, 3));
    }
}
