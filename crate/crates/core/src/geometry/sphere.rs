//! The unit sphere `S^{n-1}` in `R^n`, with closed-form geodesic operations.

use std::f64::consts::PI;

use super::{Manifold, ManifoldDescriptor, Mat, Point, Tangent};
use crate::error::{Error, Result};
use crate::rng::CounterRng;

/// `<x, y>` at or below this value is treated as antipodal.
pub const ANTIPODAL_THRESHOLD: f64 = -1.0 + 1e-9;

pub(crate) fn feasibility_error(x: &Mat) -> f64 {
    (x.norm_squared() - 1.0).abs()
}

pub(crate) fn tangency_error(x: &Mat, v: &Mat) -> f64 {
    let norm = v.norm();
    if norm == 0.0 {
        0.0
    } else {
        x.dot(v).abs() / norm
    }
}

/// Removes the `x` component of `z`, twice, so that nearly radial inputs still
/// come out tangent to working precision.
fn remove_radial(x: &Mat, z: &Mat) -> Mat {
    let mut r = z - x * x.dot(z);
    let again = x.dot(&r);
    r -= x * again;
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sphere {
    n: usize,
}

impl Sphere {
    /// The sphere `S^{n-1}` embedded in `R^n`; `n >= 2`.
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::config(format!("sphere ambient dimension must be >= 2, got {n}")));
        }
        Ok(Sphere { n })
    }

    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    fn check_tangent(&self, x: &Point, v: &Tangent) -> Result<()> {
        self.check_point(x)?;
        if v.base().coords() != x.coords() {
            return Err(Error::Numerical(
                "tangent vector is not anchored at the given point".into(),
            ));
        }
        Ok(())
    }

    /// Unit direction of the geodesic from `x` to `y`, and its length.
    /// `None` when `y == x` to working precision.
    fn geodesic_direction(&self, x: &Point, y: &Point) -> Result<Option<(Mat, f64)>> {
        let c = x.coords().dot(y.coords());
        if c <= ANTIPODAL_THRESHOLD {
            return Err(Error::Antipodal { inner: c });
        }
        let w = remove_radial(x.coords(), y.coords());
        let s = w.norm();
        if s == 0.0 {
            return Ok(None);
        }
        Ok(Some((w / s, s.atan2(c))))
    }
}

impl Manifold for Sphere {
    fn descriptor(&self) -> ManifoldDescriptor {
        ManifoldDescriptor::Sphere { n: self.n }
    }

    fn project_tangent(&self, x: &Point, z: &Mat) -> Result<Tangent> {
        self.check_point(x)?;
        self.descriptor().check_shape(z)?;
        Ok(Tangent::from_parts(x.clone(), remove_radial(x.coords(), z)))
    }

    /// `(x + v) / ||x + v||`.
    fn retract(&self, x: &Point, v: &Tangent) -> Result<Point> {
        self.check_tangent(x, v)?;
        if v.norm() == 0.0 {
            return Ok(x.clone());
        }
        let y = x.coords() + v.coords();
        let norm = y.norm();
        Ok(Point::from_parts(self.descriptor(), y / norm))
    }

    fn random_point(&self, rng: &mut CounterRng) -> Point {
        loop {
            let z = Mat::from_vec(self.n, 1, rng.normals(self.n));
            let norm = z.norm();
            if norm > 1e-12 {
                return Point::from_parts(self.descriptor(), z / norm);
            }
        }
    }

    fn supports_exp_map(&self) -> bool {
        true
    }

    fn supports_parallel_transport(&self) -> bool {
        true
    }

    /// `x cos||v|| + (v / ||v||) sin||v||`.
    fn exp_map(&self, x: &Point, v: &Tangent) -> Result<Point> {
        self.check_tangent(x, v)?;
        let theta = v.norm();
        if theta == 0.0 {
            return Ok(x.clone());
        }
        let y = x.coords() * theta.cos() + v.coords() * (theta.sin() / theta);
        let norm = y.norm();
        Ok(Point::from_parts(self.descriptor(), y / norm))
    }

    fn log_map(&self, x: &Point, y: &Point) -> Result<Tangent> {
        self.check_point(x)?;
        self.check_point(y)?;
        match self.geodesic_direction(x, y)? {
            None => Ok(Tangent::zero(x.clone())),
            Some((u, theta)) => Ok(Tangent::from_parts(x.clone(), u * theta)),
        }
    }

    /// Great-circle distance, evaluated from the chord length so that short
    /// distances keep full relative precision.
    fn dist(&self, x: &Point, y: &Point) -> Result<f64> {
        self.check_point(x)?;
        self.check_point(y)?;
        let c = x.coords().dot(y.coords());
        let d = if c >= 0.0 {
            let chord = (x.coords() - y.coords()).norm();
            2.0 * (0.5 * chord).min(1.0).asin()
        } else {
            let chord = (x.coords() + y.coords()).norm();
            PI - 2.0 * (0.5 * chord).min(1.0).asin()
        };
        Ok(d.clamp(0.0, PI))
    }

    /// Splits `v` into its component along the geodesic direction `u` and the
    /// orthogonal remainder; the along-component is rotated to
    /// `u cos(theta) - x sin(theta)`, the remainder is unchanged.
    fn parallel_transport(&self, x: &Point, y: &Point, v: &Tangent) -> Result<Tangent> {
        self.check_tangent(x, v)?;
        self.check_point(y)?;
        match self.geodesic_direction(x, y)? {
            None => Ok(Tangent::from_parts(y.clone(), v.coords().clone())),
            Some((u, theta)) => {
                let along = v.coords().dot(&u);
                let (sin, cos) = theta.sin_cos();
                let mut out = v.coords().clone();
                out += &u * (along * (cos - 1.0));
                out -= x.coords() * (along * sin);
                Ok(Tangent::from_parts(y.clone(), out))
            }
        }
    }
}
