//! Embedded Riemannian manifolds and the tangent-space machinery used by the
//! optimizer.
//!
//! Points and tangent vectors are stored in ambient coordinates as dense
//! matrices: an `n x 1` column for the sphere `S^{n-1}`, an `n x p` matrix for
//! the Stiefel manifold `St(n, p)`. Inner products are the Frobenius inner
//! product inherited from the ambient space.

mod sphere;
mod stiefel;

pub use sphere::Sphere;
pub use stiefel::Stiefel;

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::CounterRng;

pub type Mat = DMatrix<f64>;

/// Tolerance on `|<x,x> - 1|` (sphere) used when constructing points.
pub const SPHERE_POINT_TOL: f64 = 1e-10;
/// Tolerance on `||X^T X - I||_F` used when constructing Stiefel points.
pub const STIEFEL_POINT_TOL: f64 = 1e-8;
pub const SPHERE_TANGENT_TOL: f64 = 1e-10;
pub const STIEFEL_TANGENT_TOL: f64 = 1e-8;

const SAMPLE_ATTEMPTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ManifoldDescriptor {
    Sphere { n: usize },
    Stiefel { n: usize, p: usize },
}

impl ManifoldDescriptor {
    /// `(rows, cols)` of the ambient coordinate matrix.
    pub fn shape(&self) -> (usize, usize) {
        match *self {
            ManifoldDescriptor::Sphere { n } => (n, 1),
            ManifoldDescriptor::Stiefel { n, p } => (n, p),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        let (r, c) = self.shape();
        r * c
    }

    /// Dimension of every tangent space; the `d` scaling of the zeroth-order
    /// estimator.
    pub fn intrinsic_dim(&self) -> usize {
        match *self {
            ManifoldDescriptor::Sphere { n } => n - 1,
            ManifoldDescriptor::Stiefel { n, p } => n * p - p * (p + 1) / 2,
        }
    }

    /// Constraint tolerance enforced when a point is constructed.
    pub fn point_tolerance(&self) -> f64 {
        match self {
            ManifoldDescriptor::Sphere { .. } => SPHERE_POINT_TOL,
            ManifoldDescriptor::Stiefel { .. } => STIEFEL_POINT_TOL,
        }
    }

    pub(crate) fn check_shape(&self, m: &Mat) -> Result<()> {
        let shape = self.shape();
        if m.shape() != shape {
            return Err(Error::Dimension {
                expected: format!("{}x{}", shape.0, shape.1),
                got: format!("{}x{}", m.nrows(), m.ncols()),
            });
        }
        Ok(())
    }
}

impl fmt::Display for ManifoldDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ManifoldDescriptor::Sphere { n } => write!(f, "Sphere(n={n})"),
            ManifoldDescriptor::Stiefel { n, p } => write!(f, "Stiefel(n={n}, p={p})"),
        }
    }
}

/// A feasible point, in ambient coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    desc: ManifoldDescriptor,
    coords: Mat,
}

impl Point {
    /// Validates shape and feasibility at the construction tolerance.
    pub fn new(desc: ManifoldDescriptor, coords: Mat) -> Result<Self> {
        desc.check_shape(&coords)?;
        let err = match desc {
            ManifoldDescriptor::Sphere { .. } => sphere::feasibility_error(&coords),
            ManifoldDescriptor::Stiefel { .. } => stiefel::feasibility_error(&coords),
        };
        let tol = desc.point_tolerance();
        if !(err <= tol) {
            return Err(Error::Numerical(format!(
                "point is not on {desc}: constraint error {err:.3e} exceeds {tol:.0e}"
            )));
        }
        Ok(Point { desc, coords })
    }

    /// Convenience constructor for sphere points from a slice.
    pub fn sphere(coords: &[f64]) -> Result<Self> {
        Point::new(
            ManifoldDescriptor::Sphere { n: coords.len() },
            Mat::from_column_slice(coords.len(), 1, coords),
        )
    }

    pub(crate) fn from_parts(desc: ManifoldDescriptor, coords: Mat) -> Self {
        Point { desc, coords }
    }

    pub fn descriptor(&self) -> ManifoldDescriptor {
        self.desc
    }

    pub fn coords(&self) -> &Mat {
        &self.coords
    }

    pub fn into_coords(self) -> Mat {
        self.coords
    }

    /// Constraint violation: `|<x,x> - 1|` for the sphere,
    /// `||X^T X - I||_F` for Stiefel.
    pub fn feasibility_error(&self) -> f64 {
        match self.desc {
            ManifoldDescriptor::Sphere { .. } => sphere::feasibility_error(&self.coords),
            ManifoldDescriptor::Stiefel { .. } => stiefel::feasibility_error(&self.coords),
        }
    }
}

/// A tangent vector with its anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tangent {
    base: Point,
    coords: Mat,
}

impl Tangent {
    /// Validates that `coords` lies in the tangent space at `base`.
    pub fn new(base: Point, coords: Mat) -> Result<Self> {
        base.desc.check_shape(&coords)?;
        let (err, tol) = match base.desc {
            ManifoldDescriptor::Sphere { .. } => {
                (sphere::tangency_error(&base.coords, &coords), SPHERE_TANGENT_TOL)
            }
            ManifoldDescriptor::Stiefel { .. } => {
                (stiefel::tangency_error(&base.coords, &coords), STIEFEL_TANGENT_TOL)
            }
        };
        if !(err <= tol) {
            return Err(Error::Numerical(format!(
                "vector is not tangent at base: relative normal component {err:.3e}"
            )));
        }
        Ok(Tangent { base, coords })
    }

    pub fn zero(base: Point) -> Self {
        let (r, c) = base.desc.shape();
        Tangent {
            base,
            coords: Mat::zeros(r, c),
        }
    }

    pub(crate) fn from_parts(base: Point, coords: Mat) -> Self {
        Tangent { base, coords }
    }

    pub fn base(&self) -> &Point {
        &self.base
    }

    pub fn coords(&self) -> &Mat {
        &self.coords
    }

    pub fn into_coords(self) -> Mat {
        self.coords
    }

    pub fn norm(&self) -> f64 {
        self.coords.norm()
    }

    pub fn inner(&self, other: &Tangent) -> f64 {
        self.coords.dot(&other.coords)
    }

    pub fn scale(&self, s: f64) -> Tangent {
        Tangent {
            base: self.base.clone(),
            coords: &self.coords * s,
        }
    }

    /// `self + s * other`. Both vectors must share the same anchor.
    pub fn axpy(&self, s: f64, other: &Tangent) -> Result<Tangent> {
        if self.base.coords != other.base.coords {
            return Err(Error::Numerical(
                "tangent vectors anchored at different points cannot be added".into(),
            ));
        }
        Ok(Tangent {
            base: self.base.clone(),
            coords: &self.coords + &other.coords * s,
        })
    }

    /// Relative normal component; zero for an exactly tangent vector.
    pub fn tangency_error(&self) -> f64 {
        match self.base.desc {
            ManifoldDescriptor::Sphere { .. } => sphere::tangency_error(&self.base.coords, &self.coords),
            ManifoldDescriptor::Stiefel { .. } => {
                stiefel::tangency_error(&self.base.coords, &self.coords)
            }
        }
    }
}

/// Operations on an embedded submanifold of Euclidean space.
///
/// Retraction and tangent projection are required. Exponential and logarithm
/// maps, geodesic distance and parallel transport are optional capabilities;
/// the defaults report [`Error::Unsupported`].
pub trait Manifold: Send + Sync {
    fn descriptor(&self) -> ManifoldDescriptor;

    /// Orthogonal projection of an ambient vector onto `T_x M`.
    fn project_tangent(&self, x: &Point, z: &Mat) -> Result<Tangent>;

    fn retract(&self, x: &Point, v: &Tangent) -> Result<Point>;

    fn random_point(&self, rng: &mut CounterRng) -> Point;

    fn supports_exp_map(&self) -> bool {
        false
    }

    fn supports_parallel_transport(&self) -> bool {
        false
    }

    fn exp_map(&self, _x: &Point, _v: &Tangent) -> Result<Point> {
        Err(self.unsupported("exp_map"))
    }

    fn log_map(&self, _x: &Point, _y: &Point) -> Result<Tangent> {
        Err(self.unsupported("log_map"))
    }

    fn dist(&self, _x: &Point, _y: &Point) -> Result<f64> {
        Err(self.unsupported("dist"))
    }

    /// Parallel transport of `v in T_x M` to `T_y M` along the minimizing
    /// geodesic.
    fn parallel_transport(&self, _x: &Point, _y: &Point, _v: &Tangent) -> Result<Tangent> {
        Err(self.unsupported("parallel_transport"))
    }

    /// Uniform draw from the unit sphere of `T_x M`: standard-normal ambient
    /// draw, tangent projection, normalization.
    fn sample_unit_tangent(&self, x: &Point, rng: &mut CounterRng) -> Result<Tangent> {
        self.check_point(x)?;
        let (r, c) = x.desc.shape();
        for _ in 0..SAMPLE_ATTEMPTS {
            let z = Mat::from_vec(r, c, rng.normals(r * c));
            let v = self.project_tangent(x, &z)?;
            let norm = v.norm();
            if norm >= 1e-12 {
                return Ok(v.scale(1.0 / norm));
            }
        }
        Err(Error::Numerical(format!(
            "tangent sampling produced a degenerate direction {SAMPLE_ATTEMPTS} times"
        )))
    }

    fn check_point(&self, x: &Point) -> Result<()> {
        if x.desc != self.descriptor() {
            return Err(Error::Dimension {
                expected: self.descriptor().to_string(),
                got: x.desc.to_string(),
            });
        }
        Ok(())
    }

    fn unsupported(&self, operation: &'static str) -> Error {
        Error::Unsupported {
            manifold: self.descriptor().to_string(),
            operation,
        }
    }
}

/// Radial clip onto the closed ball of radius `radius` in the tangent space.
///
/// The returned norm never exceeds `radius`, including after rounding.
///
/// # Panics
/// If `radius` is not a positive finite number.
pub fn clip_to_ball(v: &Tangent, radius: f64) -> Tangent {
    assert!(radius > 0.0 && radius.is_finite(), "clip radius must be positive");
    let norm = v.norm();
    if norm <= radius {
        return v.clone();
    }
    let mut out = v.scale(radius / norm);
    while out.norm() > radius {
        out.coords *= 1.0 - f64::EPSILON;
    }
    out
}

/// Runtime-selected manifold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnyManifold {
    Sphere(Sphere),
    Stiefel(Stiefel),
}

impl AnyManifold {
    pub fn from_descriptor(desc: ManifoldDescriptor) -> Result<Self> {
        match desc {
            ManifoldDescriptor::Sphere { n } => Ok(AnyManifold::Sphere(Sphere::new(n)?)),
            ManifoldDescriptor::Stiefel { n, p } => Ok(AnyManifold::Stiefel(Stiefel::new(n, p)?)),
        }
    }

    fn inner(&self) -> &dyn Manifold {
        match self {
            AnyManifold::Sphere(s) => s,
            AnyManifold::Stiefel(s) => s,
        }
    }
}

impl Manifold for AnyManifold {
    fn descriptor(&self) -> ManifoldDescriptor {
        self.inner().descriptor()
    }
    fn project_tangent(&self, x: &Point, z: &Mat) -> Result<Tangent> {
        self.inner().project_tangent(x, z)
    }
    fn retract(&self, x: &Point, v: &Tangent) -> Result<Point> {
        self.inner().retract(x, v)
    }
    fn random_point(&self, rng: &mut CounterRng) -> Point {
        self.inner().random_point(rng)
    }
    fn supports_exp_map(&self) -> bool {
        self.inner().supports_exp_map()
    }
    fn supports_parallel_transport(&self) -> bool {
        self.inner().supports_parallel_transport()
    }
    fn exp_map(&self, x: &Point, v: &Tangent) -> Result<Point> {
        self.inner().exp_map(x, v)
    }
    fn log_map(&self, x: &Point, y: &Point) -> Result<Tangent> {
        self.inner().log_map(x, y)
    }
    fn dist(&self, x: &Point, y: &Point) -> Result<f64> {
        self.inner().dist(x, y)
    }
    fn parallel_transport(&self, x: &Point, y: &Point, v: &Tangent) -> Result<Tangent> {
        self.inner().parallel_transport(x, y, v)
    }
    fn sample_unit_tangent(&self, x: &Point, rng: &mut CounterRng) -> Result<Tangent> {
        self.inner().sample_unit_tangent(x, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn descriptor_dimensions() {
        let s = ManifoldDescriptor::Sphere { n: 10 };
        assert_eq!(s.ambient_dim(), 10);
        assert_eq!(s.intrinsic_dim(), 9);
        let st = ManifoldDescriptor::Stiefel { n: 5, p: 3 };
        assert_eq!(st.ambient_dim(), 15);
        assert_eq!(st.intrinsic_dim(), 15 - 6);
        // St(n, 1) is the sphere.
        assert_eq!(ManifoldDescriptor::Stiefel { n: 4, p: 1 }.intrinsic_dim(), 3);
    }

    #[test]
    fn point_construction_rejects_infeasible() {
        assert!(Point::sphere(&[1.0, 0.0, 0.0]).is_ok());
        assert!(Point::sphere(&[1.0, 1e-3, 0.0]).is_err());
        let desc = ManifoldDescriptor::Sphere { n: 3 };
        assert!(matches!(
            Point::new(desc, Mat::zeros(2, 1)),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn tangent_construction_rejects_normal_component() {
        let x = Point::sphere(&[1.0, 0.0, 0.0]).unwrap();
        assert!(Tangent::new(x.clone(), Mat::from_column_slice(3, 1, &[0.0, 2.0, 1.0])).is_ok());
        assert!(Tangent::new(x, Mat::from_column_slice(3, 1, &[1e-3, 2.0, 1.0])).is_err());
    }

    #[test]
    fn clip_examples() {
        let x = Point::sphere(&[1.0, 0.0, 0.0]).unwrap();
        let half = Tangent::new(x.clone(), Mat::from_column_slice(3, 1, &[0.0, 0.3, 0.4])).unwrap();
        assert_eq!(clip_to_ball(&half, 1.0), half);

        let v = Tangent::new(x.clone(), Mat::from_column_slice(3, 1, &[0.0, 3.0, 0.0])).unwrap();
        let c = clip_to_ball(&v, 1.0);
        assert_eq!(c.coords().as_slice(), &[0.0, 1.0, 0.0]);
        assert_eq!(c.base(), &x);
    }

    #[test]
    #[should_panic]
    fn clip_rejects_nonpositive_radius() {
        let x = Point::sphere(&[1.0, 0.0]).unwrap();
        clip_to_ball(&Tangent::zero(x), 0.0);
    }

    #[test]
    fn axpy_requires_same_anchor() {
        let x = Point::sphere(&[1.0, 0.0, 0.0]).unwrap();
        let y = Point::sphere(&[0.0, 1.0, 0.0]).unwrap();
        let a = Tangent::zero(x);
        let b = Tangent::zero(y);
        assert!(a.axpy(1.0, &b).is_err());
    }

    #[test]
    fn any_manifold_dispatches_capabilities() {
        let s = AnyManifold::from_descriptor(ManifoldDescriptor::Sphere { n: 3 }).unwrap();
        let st = AnyManifold::from_descriptor(ManifoldDescriptor::Stiefel { n: 3, p: 2 }).unwrap();
        assert!(s.supports_parallel_transport());
        assert!(!st.supports_parallel_transport());
        let mut rng = CounterRng::new(1);
        let x = st.random_point(&mut rng);
        let v = Tangent::zero(x.clone());
        assert!(matches!(st.exp_map(&x, &v), Err(Error::Unsupported { .. })));
        assert!(matches!(st.dist(&x, &x), Err(Error::Unsupported { .. })));
    }
}
