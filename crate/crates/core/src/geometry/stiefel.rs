//! The Stiefel manifold `St(n, p) = { X in R^{n x p} : X^T X = I_p }` with the
//! polar retraction. Geodesic operations are not provided.

use nalgebra::SymmetricEigen;

use super::{Manifold, ManifoldDescriptor, Mat, Point, Tangent};
use crate::error::{Error, Result};
use crate::rng::CounterRng;

pub(crate) fn feasibility_error(x: &Mat) -> f64 {
    let p = x.ncols();
    (x.transpose() * x - Mat::identity(p, p)).norm()
}

fn sym(a: &Mat) -> Mat {
    (a + a.transpose()) * 0.5
}

pub(crate) fn tangency_error(x: &Mat, v: &Mat) -> f64 {
    let norm = v.norm();
    if norm == 0.0 {
        0.0
    } else {
        sym(&(x.transpose() * v)).norm() / norm
    }
}

/// `S^{-1/2}` for a symmetric positive-definite `S`, via eigendecomposition.
pub(crate) fn inverse_sqrt_spd(s: &Mat) -> Result<Mat> {
    let eig = SymmetricEigen::new(s.clone());
    let min = eig.eigenvalues.min();
    if !(min > 0.0) {
        return Err(Error::Numerical(format!(
            "matrix square root needs a positive-definite input (min eigenvalue {min:e})"
        )));
    }
    let scales = eig.eigenvalues.map(|l| 1.0 / l.sqrt());
    let q = &eig.eigenvectors;
    Ok(q * Mat::from_diagonal(&scales) * q.transpose())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stiefel {
    n: usize,
    p: usize,
}

impl Stiefel {
    /// `St(n, p)` with `1 <= p <= n` and `n * p >= 2`.
    pub fn new(n: usize, p: usize) -> Result<Self> {
        if p == 0 || p > n {
            return Err(Error::config(format!("Stiefel manifold needs 1 <= p <= n, got n={n}, p={p}")));
        }
        if n * p < 2 {
            return Err(Error::config("Stiefel ambient dimension must be >= 2"));
        }
        Ok(Stiefel { n, p })
    }

    fn remove_normal(x: &Mat, z: &Mat) -> Mat {
        let r = z - x * sym(&(x.transpose() * z));
        &r - x * sym(&(x.transpose() * &r))
    }
}

impl Manifold for Stiefel {
    fn descriptor(&self) -> ManifoldDescriptor {
        ManifoldDescriptor::Stiefel { n: self.n, p: self.p }
    }

    /// `Z - X sym(X^T Z)`.
    fn project_tangent(&self, x: &Point, z: &Mat) -> Result<Tangent> {
        self.check_point(x)?;
        self.descriptor().check_shape(z)?;
        Ok(Tangent::from_parts(x.clone(), Self::remove_normal(x.coords(), z)))
    }

    /// Polar retraction `(X + xi)(I + xi^T xi)^{-1/2}`. The inverse square root
    /// is taken of the Gram matrix `(X + xi)^T (X + xi)`, which equals
    /// `I + xi^T xi` for tangent `xi` and keeps the result orthonormal even when
    /// `X` carries rounding error.
    fn retract(&self, x: &Point, v: &Tangent) -> Result<Point> {
        self.check_point(x)?;
        if v.base().coords() != x.coords() {
            return Err(Error::Numerical(
                "tangent vector is not anchored at the given point".into(),
            ));
        }
        if v.norm() == 0.0 {
            return Ok(x.clone());
        }
        let y = x.coords() + v.coords();
        let gram = y.transpose() * &y;
        let inv_sqrt = inverse_sqrt_spd(&gram)?;
        Ok(Point::from_parts(self.descriptor(), y * inv_sqrt))
    }

    fn random_point(&self, rng: &mut CounterRng) -> Point {
        loop {
            let z = Mat::from_vec(self.n, self.p, rng.normals(self.n * self.p));
            let gram = z.transpose() * &z;
            if let Ok(inv_sqrt) = inverse_sqrt_spd(&gram) {
                let x = z * inv_sqrt;
                if feasibility_error(&x) <= 1e-12 {
                    return Point::from_parts(self.descriptor(), x);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(Stiefel::new(3, 0).is_err());
        assert!(Stiefel::new(2, 3).is_err());
        assert!(Stiefel::new(1, 1).is_err());
        assert!(Stiefel::new(3, 3).is_ok());
    }

    #[test]
    fn single_column_projection_matches_sphere_case() {
        // X = e1, Z = (1,1,0): Z - X sym(X^T Z) = (1,1,0) - e1 * 1 = (0,1,0).
        let m = Stiefel::new(3, 1).unwrap();
        let desc = m.descriptor();
        let x = Point::new(desc, Mat::from_column_slice(3, 1, &[1.0, 0.0, 0.0])).unwrap();
        let z = Mat::from_column_slice(3, 1, &[1.0, 1.0, 0.0]);
        let v = m.project_tangent(&x, &z).unwrap();
        assert_eq!(v.coords().as_slice(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn retraction_at_zero_is_identity() {
        let m = Stiefel::new(5, 2).unwrap();
        let mut rng = CounterRng::new(4);
        let x = m.random_point(&mut rng);
        let y = m.retract(&x, &Tangent::zero(x.clone())).unwrap();
        assert_abs_diff_eq!((y.coords() - x.coords()).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn retraction_is_feasible_and_projection_tangent() {
        let m = Stiefel::new(8, 3).unwrap();
        let mut rng = CounterRng::new(9);
        for _ in 0..50 {
            let x = m.random_point(&mut rng);
            assert!(x.feasibility_error() < 1e-12);
            let z = Mat::from_vec(8, 3, rng.normals(24));
            let v = m.project_tangent(&x, &z).unwrap();
            assert!(v.tangency_error() < 1e-12);
            let y = m.retract(&x, &v).unwrap();
            assert!(y.feasibility_error() < 1e-10);
        }
    }

    #[test]
    fn inverse_sqrt_rejects_singular() {
        assert!(inverse_sqrt_spd(&Mat::zeros(2, 2)).is_err());
    }
}
