//! Isoparametric maps from reference to physical coordinates.

use super::ReferenceElement;
use crate::{Point2, Real};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IsoMap<T = f64> {
    pub point: Point2<T>,
    /// `jacobian[i][j] = d x_i / d r_j`.
    pub jacobian: [[T; 2]; 2],
    pub det: T,
}

impl<T: Real> IsoMap<T> {
    /// Inverse transpose of the Jacobian, mapping reference gradients to
    /// physical ones. `None` when the map is singular.
    pub fn inverse_transpose(&self) -> Option<[[T; 2]; 2]> {
        if self.det == T::zero() {
            return None;
        }
        let [[a, b], [c, d]] = self.jacobian;
        let inv = T::one() / self.det;
        // (J^{-1})^T
        Some([[d * inv, -c * inv], [-b * inv, a * inv]])
    }

    /// Physical gradient of a field from its reference gradient.
    pub fn physical_gradient(&self, g: [T; 2]) -> Option<[T; 2]> {
        let m = self.inverse_transpose()?;
        Some([m[0][0] * g[0] + m[0][1] * g[1], m[1][0] * g[0] + m[1][1] * g[1]])
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineMap<T = f64> {
    pub point: Point2<T>,
    pub tangent: Point2<T>,
    /// Arclength factor `|dx/du|`.
    pub det: T,
}

/// Maps a reference point of a 2D element with physical node coordinates
/// `coords` (in element node order).
pub fn isoparametric_map<T: Real>(el: &ReferenceElement<T>, coords: &[Point2<T>], p: Point2<T>) -> IsoMap<T> {
    assert_eq!(coords.len(), el.node_count(), "node coordinate count mismatch");
    let sv = el.eval(p);
    let mut x = Point2::zero();
    let mut j = [[T::zero(); 2]; 2];
    for ((xi, n), g) in coords.iter().zip(&sv.values).zip(&sv.gradients) {
        x += *xi * *n;
        j[0][0] += xi.x * g[0];
        j[0][1] += xi.x * g[1];
        j[1][0] += xi.y * g[0];
        j[1][1] += xi.y * g[1];
    }
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    IsoMap { point: x, jacobian: j, det }
}

/// Maps `u` in [-1, 1] along a line element with nodes `coords`.
pub fn line_map<T: Real>(coords: &[Point2<T>], u: T) -> LineMap<T> {
    let m = coords.len() - 1;
    let (v, d) = super::line_shape(m, u);
    let mut x = Point2::zero();
    let mut t = Point2::zero();
    for (c, (vi, di)) in coords.iter().zip(v.iter().zip(&d)) {
        x += *c * *vi;
        t += *c * *di;
    }
    LineMap { point: x, tangent: t, det: t.norm() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::refelem::{quadrature, Family};

    #[test]
    fn identity_map() {
        for family in [Family::Triangle, Family::Quadrilateral] {
            let el = ReferenceElement::<f64>::new(family, 3).unwrap();
            let coords = el.nodes().to_vec();
            let p = family.centroid::<f64>() + Point2::new(0.05, 0.02);
            let m = isoparametric_map(&el, &coords, p);
            assert!((m.point - p).norm() < 1e-14);
            assert!((m.det - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn scaled_quad_has_det_four() {
        let el = ReferenceElement::<f64>::new(Family::Quadrilateral, 2).unwrap();
        let coords: Vec<_> = el.nodes().iter().map(|p| *p * 2.0).collect();
        let q = quadrature::<f64>(Family::Quadrilateral, 6).unwrap();
        let dets: Vec<f64> = q.points.iter().map(|&p| isoparametric_map(&el, &coords, p).det).collect();
        let mean = dets.iter().sum::<f64>() / dets.len() as f64;
        let var = dets.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / dets.len() as f64;
        assert!((mean - 4.0).abs() < 1e-13);
        assert!(var < 1e-12);
    }

    #[test]
    fn affine_triangle_has_constant_jacobian() {
        let el = ReferenceElement::<f64>::new(Family::Triangle, 4).unwrap();
        let (a, b, c) = (Point2::new(0.3, -0.2), Point2::new(1.7, 0.1), Point2::new(0.5, 1.4));
        let coords: Vec<_> = el.nodes().iter().map(|p| a + (b - a) * p.x + (c - a) * p.y).collect();
        let expect = (b - a).cross(c - a);
        let q = quadrature::<f64>(Family::Triangle, 8).unwrap();
        for &p in &q.points {
            assert!((isoparametric_map(&el, &coords, p).det - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn curved_quad_jacobian_matches_finite_differences() {
        let el = ReferenceElement::<f64>::new(Family::Quadrilateral, 2).unwrap();
        // bulge the top edge (nodes with b = 1) outward
        let coords: Vec<_> = el
            .nodes()
            .iter()
            .map(|p| if p.y > 0.5 { Point2::new(p.x, p.y + 0.3 * (1.0 - p.x * p.x)) } else { *p })
            .collect();
        let q = quadrature::<f64>(Family::Quadrilateral, 7).unwrap();
        assert_eq!(q.len(), 16);
        let h = 1e-6;
        let x = |p: Point2<f64>| isoparametric_map(&el, &coords, p).point;
        for &p in &q.points {
            let m = isoparametric_map(&el, &coords, p);
            let da = (x(p + Point2::new(h, 0.0)) - x(p - Point2::new(h, 0.0))) / (2.0 * h);
            let db = (x(p + Point2::new(0.0, h)) - x(p - Point2::new(0.0, h))) / (2.0 * h);
            let fd = da.cross(db);
            assert!((fd - m.det).abs() < 1e-6);
            assert!(m.det > 0.0);
        }
    }

    #[test]
    fn line_arclength_factor() {
        let coords = [Point2::new(0.0, 0.0), Point2::new(1.0, 1.0), Point2::new(2.0, 2.0)];
        let lm = line_map(&coords, 0.3);
        assert!((lm.det - 2f64.sqrt()).abs() < 1e-14);
        assert!((lm.point - Point2::new(1.3, 1.3)).norm() < 1e-14);
    }

    #[test]
    fn physical_gradient_inverts_scaling() {
        let el = ReferenceElement::<f64>::new(Family::Quadrilateral, 1).unwrap();
        let coords: Vec<_> = el.nodes().iter().map(|p| Point2::new(2.0 * p.x, 0.5 * p.y)).collect();
        let m = isoparametric_map(&el, &coords, Point2::new(0.1, 0.2));
        let g = m.physical_gradient([1.0, 1.0]).unwrap();
        assert!((g[0] - 0.5).abs() < 1e-15 && (g[1] - 2.0).abs() < 1e-15);
    }
}
