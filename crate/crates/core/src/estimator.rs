//! Two-point zeroth-order Riemannian gradient estimator.
//!
//! ```text
//! g(x) = d / (2 delta) * (F(exp_x(delta u), nu) - F(exp_x(-delta u), nu)) * u
//! ```
//!
//! with `u` uniform on the unit sphere of `T_x M`, `d = dim T_x M`, and a
//! single data draw `nu` shared by both evaluations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Manifold, ManifoldDescriptor, Point, Tangent};
use crate::oracles::{CountingOracle, SampleIndex, StochasticObjective};
use crate::rng::CounterRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoConfig {
    /// Smoothing radius, in `(0, 1]`.
    pub delta: f64,
    /// Intrinsic dimension of the manifold.
    pub dim: usize,
}

impl ZoConfig {
    pub fn new(delta: f64, manifold: ManifoldDescriptor) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::config(format!(
                "smoothing radius must lie in (0, 1], got {delta}"
            )));
        }
        Ok(ZoConfig {
            delta,
            dim: manifold.intrinsic_dim(),
        })
    }

    fn scale(&self) -> f64 {
        self.dim as f64 / (2.0 * self.delta)
    }
}

/// Draws a direction, then one sample, and evaluates the estimator. Costs
/// exactly one sample and two value queries.
pub fn zo_gradient<M, P>(
    oracle: &mut CountingOracle<'_, P>,
    manifold: &M,
    x: &Point,
    cfg: &ZoConfig,
    rng: &mut CounterRng,
) -> Result<Tangent>
where
    M: Manifold + ?Sized,
    P: StochasticObjective + ?Sized,
{
    if !manifold.supports_exp_map() {
        return Err(manifold.unsupported("exp_map (zeroth-order estimator)"));
    }
    let u = manifold.sample_unit_tangent(x, rng)?;
    let nu = oracle.draw_sample(rng);
    zo_gradient_along(oracle, manifold, x, &u, &nu, cfg)
}

/// The estimator for a given direction `u` (unit, tangent at `x`) and sample.
pub fn zo_gradient_along<M, P>(
    oracle: &mut CountingOracle<'_, P>,
    manifold: &M,
    x: &Point,
    u: &Tangent,
    nu: &SampleIndex,
    cfg: &ZoConfig,
) -> Result<Tangent>
where
    M: Manifold + ?Sized,
    P: StochasticObjective + ?Sized,
{
    let step = u.scale(cfg.delta);
    let plus = manifold.exp_map(x, &step)?;
    let minus = manifold.exp_map(x, &step.scale(-1.0))?;
    let f_plus = oracle.stochastic_value(&plus, nu);
    let f_minus = oracle.stochastic_value(&minus, nu);
    Ok(u.scale(cfg.scale() * (f_plus - f_minus)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Mat, Sphere, Stiefel};
    use crate::oracles::{ConstantObjective, LinearObjective};

    #[test]
    fn config_validates_radius() {
        let s = ManifoldDescriptor::Sphere { n: 10 };
        assert!(ZoConfig::new(0.0, s).is_err());
        assert!(ZoConfig::new(1.5, s).is_err());
        let c = ZoConfig::new(1.0, s).unwrap();
        assert_eq!(c.dim, 9);
    }

    #[test]
    fn constant_objective_gives_zero() {
        let m = Sphere::new(5).unwrap();
        let p = ConstantObjective { value: 3.5, shape: (5, 1) };
        let mut o = CountingOracle::new(&p);
        let mut rng = CounterRng::new(0);
        let x = m.random_point(&mut rng);
        let cfg = ZoConfig::new(0.1, m.descriptor()).unwrap();
        let g = zo_gradient(&mut o, &m, &x, &cfg, &mut rng).unwrap();
        assert_eq!(g.norm(), 0.0);
        assert_eq!(o.stats().value_queries, 2);
        assert_eq!(o.stats().samples_drawn, 1);
        assert_eq!(o.stats().gradient_queries, 0);
    }

    #[test]
    fn antithetic_direction_gives_identical_estimate() {
        let m = Sphere::new(6).unwrap();
        let mut rng = CounterRng::new(8);
        let c = Mat::from_vec(6, 1, rng.normals(6));
        let p = LinearObjective { c };
        let mut o = CountingOracle::new(&p);
        let cfg = ZoConfig::new(0.05, m.descriptor()).unwrap();
        for _ in 0..50 {
            let x = m.random_point(&mut rng);
            let u = m.sample_unit_tangent(&x, &mut rng).unwrap();
            let nu = o.draw_sample(&mut rng);
            let a = zo_gradient_along(&mut o, &m, &x, &u, &nu, &cfg).unwrap();
            let b = zo_gradient_along(&mut o, &m, &x, &u.scale(-1.0), &nu, &cfg).unwrap();
            let bits = |t: &Tangent| t.coords().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a), bits(&b));
        }
    }

    #[test]
    fn norm_bound_holds() {
        let m = Sphere::new(4).unwrap();
        let mut rng = CounterRng::new(3);
        let p = LinearObjective { c: Mat::from_vec(4, 1, rng.normals(4)) };
        let mut o = CountingOracle::new(&p);
        let cfg = ZoConfig::new(0.2, m.descriptor()).unwrap();
        let x = m.random_point(&mut rng);
        let u = m.sample_unit_tangent(&x, &mut rng).unwrap();
        let nu = o.draw_sample(&mut rng);
        let g = zo_gradient_along(&mut o, &m, &x, &u, &nu, &cfg).unwrap();
        let fp = p.c.dot(m.exp_map(&x, &u.scale(0.2)).unwrap().coords());
        let fm = p.c.dot(m.exp_map(&x, &u.scale(-0.2)).unwrap().coords());
        assert!(g.norm() <= 3.0 / 0.4 * (fp - fm).abs() * (1.0 + 1e-12));
    }

    #[test]
    fn stiefel_is_unsupported() {
        let m = Stiefel::new(4, 2).unwrap();
        let p = ConstantObjective { value: 0.0, shape: (4, 2) };
        let mut o = CountingOracle::new(&p);
        let mut rng = CounterRng::new(0);
        let x = m.random_point(&mut rng);
        let cfg = ZoConfig::new(0.1, m.descriptor()).unwrap();
        assert!(matches!(
            zo_gradient(&mut o, &m, &x, &cfg, &mut rng),
            Err(Error::Unsupported { .. })
        ));
    }
}
