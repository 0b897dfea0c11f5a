//! Small 2D vector and box types.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use crate::Real;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Point2<T = f64> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Point2<T> {
    #[inline]
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    #[inline]
    pub fn cross(self, o: Self) -> T {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn norm_squared(self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn lerp(self, o: Self, t: T) -> Self {
        self + (o - self) * t
    }

    #[inline]
    pub fn distance(self, o: Self) -> T {
        (o - self).norm()
    }

    /// Lossy conversion to another scalar type.
    pub fn cast<U: Real>(self) -> Point2<U> {
        Point2::new(U::lit(self.x.to_f64_lossy()), U::lit(self.y.to_f64_lossy()))
    }
}

impl<T: Real> Add for Point2<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Real> Sub for Point2<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Real> AddAssign for Point2<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl<T: Real> SubAssign for Point2<T> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

impl<T: Real> Mul<T> for Point2<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

impl<T: Real> Div<T> for Point2<T> {
    type Output = Self;
    #[inline]
    fn div(self, s: T) -> Self {
        Self::new(self.x / s, self.y / s)
    }
}

impl<T: Real> Neg for Point2<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// Axis-aligned rectangle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundingBox<T = f64> {
    pub min: Point2<T>,
    pub max: Point2<T>,
}

impl<T: Real> BoundingBox<T> {
    pub fn new(min: Point2<T>, max: Point2<T>) -> Self {
        Self { min, max }
    }

    /// The square [-1, 1]², default domain of every benchmark.
    pub fn symmetric_unit() -> Self {
        Self::new(Point2::new(-T::one(), -T::one()), Point2::new(T::one(), T::one()))
    }

    pub fn width(&self) -> T {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> T {
        self.max.y - self.min.y
    }

    pub fn contains(&self, p: Point2<T>, tol: T) -> bool {
        p.x >= self.min.x - tol
            && p.x <= self.max.x + tol
            && p.y >= self.min.y - tol
            && p.y <= self.max.y + tol
    }

    /// True when `p` lies on one of the four sides (within `tol`).
    pub fn on_boundary(&self, p: Point2<T>, tol: T) -> bool {
        self.contains(p, tol)
            && ((p.x - self.min.x).abs() <= tol
                || (p.x - self.max.x).abs() <= tol
                || (p.y - self.min.y).abs() <= tol
                || (p.y - self.max.y).abs() <= tol)
    }
}

/// Signed area of a polygon (positive when counterclockwise).
pub fn polygon_area<T: Real>(pts: &[Point2<T>]) -> T {
    let n = pts.len();
    let mut a = T::zero();
    for i in 0..n {
        a += pts[i].cross(pts[(i + 1) % n]);
    }
    a * T::lit(0.5)
}

/// Smallest interior angle (radians) of a triangle.
pub fn min_triangle_angle<T: Real>(a: Point2<T>, b: Point2<T>, c: Point2<T>) -> T {
    let angle = |p: Point2<T>, q: Point2<T>, r: Point2<T>| {
        let u = q - p;
        let v = r - p;
        u.cross(v).abs().atan2(u.dot(v))
    };
    angle(a, b, c).min(angle(b, c, a)).min(angle(c, a, b))
}
