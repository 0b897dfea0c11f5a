//! Closed-form solutions of the benchmark problems.

use cdfem::mesh::Side;
use cdfem::Point2;

use crate::{FemError, Material};

/// Value and gradient `grad[i][j] = d u_i / d x_j` of a scalar (component
/// 0 only) or displacement field.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ExactValue {
    pub value: [f64; 2],
    pub grad: [[f64; 2]; 2],
}

impl ExactValue {
    pub fn scalar(value: f64, grad: [f64; 2]) -> Self {
        Self { value: [value, 0.0], grad: [grad, [0.0; 2]] }
    }

    /// Engineering strain `(εxx, εyy, γxy)`.
    pub fn strain(&self) -> [f64; 3] {
        let g = self.grad;
        [g[0][0], g[1][1], g[0][1] + g[1][0]]
    }
}

pub trait ExactSolution: Sync {
    fn components(&self) -> usize;

    /// Evaluates at `p`. `side` selects the branch of piecewise solutions so
    /// points of a curved sub-element slightly across the exact interface
    /// still use their own material's field.
    fn eval(&self, p: Point2<f64>, side: Side) -> Result<ExactValue, FemError>;
}

/// Smooth scalar function used by the projection benchmark.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SinCos;

impl ExactSolution for SinCos {
    fn components(&self) -> usize {
        1
    }

    fn eval(&self, p: Point2<f64>, _: Side) -> Result<ExactValue, FemError> {
        let (s2, c2) = (2.0 * p.x).sin_cos();
        let (s3, c3) = (3.0 * p.y).sin_cos();
        Ok(ExactValue::scalar(s2 * c3, [2.0 * c2 * c3, -3.0 * s2 * s3]))
    }
}

/// Scalar solution from value and gradient closures.
pub struct ScalarFn<F>(pub F);

impl<F: Fn(Point2<f64>) -> (f64, [f64; 2]) + Sync> ExactSolution for ScalarFn<F> {
    fn components(&self) -> usize {
        1
    }

    fn eval(&self, p: Point2<f64>, _: Side) -> Result<ExactValue, FemError> {
        let (v, g) = (self.0)(p);
        Ok(ExactValue::scalar(v, g))
    }
}

/// Displacement solution from a closure returning `(u, grad u)`.
pub struct VectorFn<F>(pub F);

impl<F: Fn(Point2<f64>) -> ([f64; 2], [[f64; 2]; 2]) + Sync> ExactSolution for VectorFn<F> {
    fn components(&self) -> usize {
        2
    }

    fn eval(&self, p: Point2<f64>, _: Side) -> Result<ExactValue, FemError> {
        let (value, grad) = (self.0)(p);
        Ok(ExactValue { value, grad })
    }
}

/// Radial field `u = f(r) e_r` of a circular inclusion of radius `a`
/// (material `inner`) in a matrix (`outer`), loaded so that `u_r(b) = b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BiMaterial {
    pub a: f64,
    pub b: f64,
    pub inner: Material,
    pub outer: Material,
}

impl BiMaterial {
    pub fn new(a: f64, b: f64, inner: Material, outer: Material) -> Result<Self, FemError> {
        if !(a > 0.0 && b > a) {
            return Err(FemError::Parameter(format!("need 0 < a < b, got a = {a}, b = {b}")));
        }
        Ok(Self { a, b, inner, outer })
    }

    pub fn alpha(&self) -> f64 {
        let (l1, m1) = (self.inner.lambda(), self.inner.mu());
        let (l2, m2) = (self.outer.lambda(), self.outer.mu());
        let (a2, b2) = (self.a * self.a, self.b * self.b);
        (l1 + m1 + m2) * b2 / ((l2 + m2) * a2 + (l1 + m1) * (b2 - a2) + m2 * b2)
    }

    /// `(u_r, du_r/dr)` on the branch of `side`.
    pub fn radial(&self, r: f64, side: Side) -> (f64, f64) {
        let alpha = self.alpha();
        let b2 = self.b * self.b;
        match side {
            Side::Minus => {
                let c = (1.0 - b2 / (self.a * self.a)) * alpha + b2 / (self.a * self.a);
                (c * r, c)
            }
            Side::Plus => ((r - b2 / r) * alpha + b2 / r, alpha * (1.0 + b2 / (r * r)) - b2 / (r * r)),
        }
    }

    /// Branch by the exact interface.
    pub fn side_of(&self, p: Point2<f64>) -> Side {
        if p.norm() < self.a {
            Side::Minus
        } else {
            Side::Plus
        }
    }

    pub fn material(&self, side: Side) -> Material {
        match side {
            Side::Minus => self.inner,
            Side::Plus => self.outer,
        }
    }
}

impl ExactSolution for BiMaterial {
    fn components(&self) -> usize {
        2
    }

    fn eval(&self, p: Point2<f64>, side: Side) -> Result<ExactValue, FemError> {
        let r = p.norm();
        let (f, df) = self.radial(r, side);
        if side == Side::Minus {
            // u = c x
            return Ok(ExactValue { value: [df * p.x, df * p.y], grad: [[df, 0.0], [0.0, df]] });
        }
        if r == 0.0 {
            return Err(FemError::Domain { x: p.x, y: p.y, reason: "outer branch at the origin".into() });
        }
        let (c, s) = (p.x / r, p.y / r);
        let q = f / r;
        // grad u = f' e_r e_r^T + (f / r) (I - e_r e_r^T)
        let grad = [[df * c * c + q * s * s, (df - q) * c * s], [(df - q) * c * s, df * s * s + q * c * c]];
        Ok(ExactValue { value: [f * c, f * s], grad })
    }
}

/// Infinite plate with a traction-free hole of radius `a` under uniaxial
/// tension `t_x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlateHole {
    pub a: f64,
    pub tx: f64,
    pub material: Material,
}

impl PlateHole {
    pub fn new(a: f64, tx: f64, material: Material) -> Result<Self, FemError> {
        if a <= 0.0 {
            return Err(FemError::Parameter(format!("hole radius {a} must be positive")));
        }
        Ok(Self { a, tx, material })
    }

    /// Displacement from polar coordinates, with `d/dr` and `d/dθ`.
    fn polar(&self, r: f64, t: f64) -> [[f64; 3]; 2] {
        let a = self.a;
        let k = self.material.kolosov();
        let f = self.tx * a / (8.0 * self.material.mu());
        let (s1, c1) = t.sin_cos();
        let (s3, c3) = (3.0 * t).sin_cos();
        let (ra, ar, a3r3) = (r / a, a / r, (a / r).powi(3));
        let ux = f * (ra * (k + 1.0) * c1 + 2.0 * ar * ((1.0 + k) * c1 + c3) - 2.0 * a3r3 * c3);
        let ux_r = f * ((k + 1.0) * c1 / a - 2.0 * ar / r * ((1.0 + k) * c1 + c3) + 6.0 * a3r3 / r * c3);
        let ux_t = f * (-ra * (k + 1.0) * s1 + 2.0 * ar * (-(1.0 + k) * s1 - 3.0 * s3) + 6.0 * a3r3 * s3);
        let uy = f * (ra * (k - 3.0) * s1 + 2.0 * ar * ((1.0 - k) * s1 + s3) - 2.0 * a3r3 * s3);
        let uy_r = f * ((k - 3.0) * s1 / a - 2.0 * ar / r * ((1.0 - k) * s1 + s3) + 6.0 * a3r3 / r * s3);
        let uy_t = f * (ra * (k - 3.0) * c1 + 2.0 * ar * ((1.0 - k) * c1 + 3.0 * c3) - 6.0 * a3r3 * c3);
        [[ux, ux_r, ux_t], [uy, uy_r, uy_t]]
    }
}

impl ExactSolution for PlateHole {
    fn components(&self) -> usize {
        2
    }

    fn eval(&self, p: Point2<f64>, _: Side) -> Result<ExactValue, FemError> {
        let r = p.norm();
        if r == 0.0 || !r.is_finite() {
            return Err(FemError::Domain { x: p.x, y: p.y, reason: "r must be positive".into() });
        }
        let t = p.y.atan2(p.x);
        let (c, s) = (p.x / r, p.y / r);
        let u = self.polar(r, t);
        let cart = |d: [f64; 3]| [c * d[1] - s / r * d[2], s * d[1] + c / r * d[2]];
        Ok(ExactValue { value: [u[0][0], u[1][0]], grad: [cart(u[0]), cart(u[1])] })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bimaterial() -> BiMaterial {
        BiMaterial::new(0.4, 2.0, Material::new(10.0, 0.3).unwrap(), Material::new(1.0, 0.25).unwrap()).unwrap()
    }

    fn central_difference(sol: &dyn ExactSolution, p: Point2<f64>, side: Side) -> [[f64; 2]; 2] {
        let h = 1e-6;
        let mut g = [[0.0; 2]; 2];
        for (j, d) in [Point2::new(h, 0.0), Point2::new(0.0, h)].into_iter().enumerate() {
            let up = sol.eval(p + d, side).unwrap().value;
            let dn = sol.eval(p - d, side).unwrap().value;
            for i in 0..2 {
                g[i][j] = (up[i] - dn[i]) / (2.0 * h);
            }
        }
        g
    }

    #[test]
    fn bimaterial_alpha_by_hand() {
        let s = bimaterial();
        // λ1 = 10·0.3/(1.3·0.4), μ1 = 10/2.6, λ2 = 0.25/(1.25·0.5), μ2 = 1/2.5
        let (l1, m1, l2, m2) = (3.0 / 0.52, 10.0 / 2.6, 0.4, 0.4);
        let alpha = (l1 + m1 + m2) * 4.0 / ((l2 + m2) * 0.16 + (l1 + m1) * (4.0 - 0.16) + m2 * 4.0);
        assert!((s.alpha() - alpha).abs() < 1e-14);
    }

    #[test]
    fn bimaterial_is_continuous_with_continuous_traction() {
        let s = bimaterial();
        let (ui, di) = s.radial(s.a, Side::Minus);
        let (uo, dout) = s.radial(s.a, Side::Plus);
        assert!((ui - uo).abs() < 1e-12);
        let srr = |m: Material, u: f64, du: f64| (m.lambda() + 2.0 * m.mu()) * du + m.lambda() * u / s.a;
        assert!((srr(s.inner, ui, di) - srr(s.outer, uo, dout)).abs() < 1e-12);
        assert!((s.radial(s.b, Side::Plus).0 - s.b).abs() < 1e-12);
    }

    #[test]
    fn bimaterial_is_radial() {
        let s = bimaterial();
        for k in 0..100 {
            let t = k as f64 * 0.37;
            let r = 0.05 + 0.013 * k as f64;
            let p = Point2::new(r * t.cos(), r * t.sin());
            let u = s.eval(p, s.side_of(p)).unwrap().value;
            let ut = -t.sin() * u[0] + t.cos() * u[1];
            assert!(ut.abs() < 1e-13);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let plate = PlateHole::new(0.4, 1.0, Material::new(1e4, 0.3).unwrap()).unwrap();
        let bi = bimaterial();
        let mut x = 0.1234f64;
        for _ in 0..20 {
            x = (x * 7.13 + 0.31).fract();
            let y = (x * 13.7 + 0.17).fract();
            let p = Point2::new(-1.0 + 2.0 * x, -1.0 + 2.0 * y);
            if p.norm() < 0.45 {
                continue;
            }
            for (sol, side) in [(&plate as &dyn ExactSolution, Side::Plus), (&bi, Side::Plus), (&bi, Side::Minus), (&SinCos, Side::Plus)] {
                let g = sol.eval(p, side).unwrap().grad;
                let fd = central_difference(sol, p, side);
                let scale = g.iter().flatten().fold(1e-4_f64, |m, v| m.max(v.abs()));
                for i in 0..sol.components() {
                    for j in 0..2 {
                        assert!((g[i][j] - fd[i][j]).abs() <= 1e-6 * scale.max(1.0), "{p:?} {i}{j}");
                    }
                }
            }
        }
    }

    #[test]
    fn plate_hole_far_field_and_domain_error() {
        let plate = PlateHole::new(0.4, 1.0, Material::new(1e4, 0.3).unwrap()).unwrap();
        assert!(plate.eval(Point2::new(0.0, 0.0), Side::Plus).is_err());
        // traction-free hole: σ_rr = 0 on r = a
        let c = plate.material.stiffness();
        for k in 0..12 {
            let t = k as f64 * 0.5;
            let p = Point2::new(0.4 * t.cos(), 0.4 * t.sin());
            let e = plate.eval(p, Side::Plus).unwrap().strain();
            let s: Vec<f64> = (0..3).map(|i| (0..3).map(|j| c[i][j] * e[j]).sum()).collect();
            let (ct, st) = (t.cos(), t.sin());
            let srr = s[0] * ct * ct + s[1] * st * st + 2.0 * s[2] * ct * st;
            let srt = (s[1] - s[0]) * ct * st + s[2] * (ct * ct - st * st);
            assert!(srr.abs() < 1e-12 && srt.abs() < 1e-12, "{srr} {srt}");
        }
    }
}
