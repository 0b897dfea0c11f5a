//! Analytic level-set functions.

use std::fmt;
use std::str::FromStr;

use crate::{Point2, Real};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape<T = f64> {
    /// Signed distance `‖x − c‖ − r`.
    Circle { center: Point2<T>, radius: T },
    /// `‖x‖ − (r + α sin(ωθ))`.
    Flower { radius: T, amplitude: T, frequency: T },
    /// `a x + b y + c`.
    Linear { a: T, b: T, c: T },
}

impl<T: Real> Shape<T> {
    pub fn circle(radius: T) -> Self {
        Shape::Circle { center: Point2::zero(), radius }
    }

    pub fn flower(radius: T, amplitude: T, frequency: T) -> Self {
        Shape::Flower { radius, amplitude, frequency }
    }

    pub fn eval(&self, p: Point2<T>) -> T {
        match *self {
            Shape::Circle { center, radius } => (p - center).norm() - radius,
            Shape::Flower { radius, amplitude, frequency } => {
                let theta = p.y.atan2(p.x);
                p.norm() - (radius + amplitude * (frequency * theta).sin())
            }
            Shape::Linear { a, b, c } => a * p.x + b * p.y + c,
        }
    }

    /// Gradient; undefined (NaN) at the center of the radial shapes.
    pub fn gradient(&self, p: Point2<T>) -> [T; 2] {
        match *self {
            Shape::Circle { center, .. } => {
                let d = p - center;
                let n = d.norm();
                [d.x / n, d.y / n]
            }
            Shape::Flower { amplitude, frequency, .. } => {
                let rr = p.norm_squared();
                let r = rr.sqrt();
                let theta = p.y.atan2(p.x);
                let dphi_dtheta = -amplitude * frequency * (frequency * theta).cos();
                // dθ/dx = -y/r², dθ/dy = x/r²
                [p.x / r - dphi_dtheta * p.y / rr, p.y / r + dphi_dtheta * p.x / rr]
            }
            Shape::Linear { a, b, .. } => [a, b],
        }
    }

    pub fn as_fn(&self) -> impl Fn(Point2<T>) -> T + '_ {
        move |p| self.eval(p)
    }
}

impl<T: Real> fmt::Display for Shape<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Circle { center, radius } if *center == Point2::zero() => write!(f, "circle:{radius}"),
            Shape::Circle { center, radius } => write!(f, "circle:{radius},{},{}", center.x, center.y),
            Shape::Flower { radius, amplitude, frequency } => write!(f, "flower:{radius},{amplitude},{frequency}"),
            Shape::Linear { a, b, c } => write!(f, "linear:{a},{b},{c}"),
        }
    }
}

impl<T: Real> FromStr for Shape<T> {
    type Err = String;

    /// `circle:r[,cx,cy]`, `flower:r,alpha,omega` or `linear:a,b,c`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, args) = s.split_once(':').ok_or_else(|| format!("expected `kind:params`, got `{s}`"))?;
        let v: Vec<T> = args
            .split(',')
            .map(|a| a.trim().parse::<T>().map_err(|_| format!("bad number `{a}` in `{s}`")))
            .collect::<Result<_, _>>()?;
        match (kind, v.len()) {
            ("circle", 1) => Ok(Shape::circle(v[0])),
            ("circle", 3) => Ok(Shape::Circle { center: Point2::new(v[1], v[2]), radius: v[0] }),
            ("flower", 3) => Ok(Shape::flower(v[0], v[1], v[2])),
            ("linear", 3) => Ok(Shape::Linear { a: v[0], b: v[1], c: v[2] }),
            _ => Err(format!("unknown level set `{s}`")),
        }
    }
}
