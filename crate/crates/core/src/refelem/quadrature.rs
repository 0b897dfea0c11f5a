//! Quadrature rules on the reference line, triangle and square.
//!
//! Gauss–Legendre nodes are computed by Newton iteration on the Legendre
//! recurrence (in f64, then converted). Triangles use symmetric rules up to
//! degree 5 and a collapsed-coordinate tensor rule above that.

use super::{Family, RefElemError};
use crate::{Point2, Real};

/// Highest Gauss–Legendre point count per direction.
pub const MAX_GAUSS_POINTS: usize = 40;

/// Highest exactness degree served on any family.
pub const MAX_QUADRATURE_DEGREE: usize = 2 * MAX_GAUSS_POINTS - 3;

#[derive(Clone, Debug)]
pub struct QuadratureRule<T = f64> {
    pub points: Vec<Point2<T>>,
    pub weights: Vec<T>,
    /// Polynomial degree integrated exactly.
    pub degree: usize,
}

impl<T: Real> QuadratureRule<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Point2<T>, T)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }

    fn from_f64(points: Vec<(f64, f64)>, weights: Vec<f64>, degree: usize) -> Self {
        Self {
            points: points.into_iter().map(|(x, y)| Point2::new(T::lit(x), T::lit(y))).collect(),
            weights: weights.into_iter().map(T::lit).collect(),
            degree,
        }
    }
}

/// Gauss–Legendre points and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// P_n(z) and P_n'(z) via the three-term recurrence.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

fn gauss_points_for(degree: usize) -> usize {
    (degree + 2) / 2
}

/// Returns a rule on the reference domain of `family` exact for polynomials
/// of (total, or tensor for quads) degree `degree`.
pub fn quadrature<T: Real>(family: Family, degree: usize) -> Result<QuadratureRule<T>, RefElemError> {
    if degree > MAX_QUADRATURE_DEGREE {
        return Err(RefElemError::UnsupportedDegree { degree, max: MAX_QUADRATURE_DEGREE });
    }
    let rule = match family {
        Family::Line => {
            let (x, w) = gauss_legendre(gauss_points_for(degree));
            QuadratureRule::from_f64(x.into_iter().map(|u| (u, 0.0)).collect(), w, degree)
        }
        Family::Quadrilateral => {
            let n = gauss_points_for(degree);
            let (x, w) = gauss_legendre(n);
            let mut pts = Vec::with_capacity(n * n);
            let mut wts = Vec::with_capacity(n * n);
            for j in 0..n {
                for i in 0..n {
                    pts.push((x[i], x[j]));
                    wts.push(w[i] * w[j]);
                }
            }
            QuadratureRule::from_f64(pts, wts, degree)
        }
        Family::Triangle => triangle_rule(degree),
    };
    Ok(rule)
}

fn triangle_rule<T: Real>(degree: usize) -> QuadratureRule<T> {
    match degree {
        0 | 1 => QuadratureRule::from_f64(vec![(1.0 / 3.0, 1.0 / 3.0)], vec![0.5], 1),
        2 => QuadratureRule::from_f64(
            vec![(1.0 / 6.0, 1.0 / 6.0), (2.0 / 3.0, 1.0 / 6.0), (1.0 / 6.0, 2.0 / 3.0)],
            vec![1.0 / 6.0; 3],
            2,
        ),
        3 | 4 => {
            let a1 = 0.445_948_490_915_964_886_3;
            let w1 = 0.223_381_589_678_011_465_7 / 2.0;
            let a2 = 0.091_576_213_509_770_743_46;
            let w2 = 0.109_951_743_655_321_867_6 / 2.0;
            let mut pts = Vec::new();
            let mut wts = Vec::new();
            for (a, w) in [(a1, w1), (a2, w2)] {
                let b = 1.0 - 2.0 * a;
                pts.extend([(a, a), (b, a), (a, b)]);
                wts.extend([w; 3]);
            }
            QuadratureRule::from_f64(pts, wts, 4)
        }
        5 => {
            let s15 = 15f64.sqrt();
            let a1 = (6.0 - s15) / 21.0;
            let a2 = (6.0 + s15) / 21.0;
            let w1 = (155.0 - s15) / 2400.0;
            let w2 = (155.0 + s15) / 2400.0;
            let mut pts = vec![(1.0 / 3.0, 1.0 / 3.0)];
            let mut wts = vec![9.0 / 80.0];
            for (a, w) in [(a1, w1), (a2, w2)] {
                let b = 1.0 - 2.0 * a;
                pts.extend([(a, a), (b, a), (a, b)]);
                wts.extend([w; 3]);
            }
            QuadratureRule::from_f64(pts, wts, 5)
        }
        _ => collapsed_triangle_rule(degree),
    }
}

/// Duffy collapse of the unit square onto the unit triangle:
/// `r = ξ(1 - η)`, `s = η`, Jacobian `1 - η`.
fn collapsed_triangle_rule<T: Real>(degree: usize) -> QuadratureRule<T> {
    let (xa, wa) = gauss_legendre(gauss_points_for(degree));
    let (xb, wb) = gauss_legendre(gauss_points_for(degree + 1));
    let mut pts = Vec::with_capacity(xa.len() * xb.len());
    let mut wts = Vec::with_capacity(xa.len() * xb.len());
    for (&eb, &web) in xb.iter().zip(&wb) {
        let eta = 0.5 * (1.0 + eb);
        for (&ea, &wea) in xa.iter().zip(&wa) {
            let xi = 0.5 * (1.0 + ea);
            pts.push((xi * (1.0 - eta), eta));
            wts.push(0.25 * wea * web * (1.0 - eta));
        }
    }
    QuadratureRule::from_f64(pts, wts, degree)
}
