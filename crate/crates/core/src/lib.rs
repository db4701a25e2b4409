//! Stochastic nonsmooth nonconvex optimization on Riemannian manifolds.
//!
//! The crate implements the Riemannian online-to-nonconvex conversion: an
//! epoch-restarted, clipped online gradient method whose iterates move by
//! retraction and whose online state is carried between tangent spaces either
//! by parallel transport or by orthogonal projection. Gradients come from a
//! stochastic first-order oracle or from a two-point zeroth-order estimator
//! built on the exponential map.
//!
//! Modules:
//! - [`geometry`]: sphere and Stiefel manifolds, retractions, transports.
//! - [`oracles`]: stochastic objectives, including sparse PCA on the sphere.
//! - [`estimator`]: the zeroth-order Riemannian gradient estimator.
//! - [`optimizer`]: schedules and the optimizer loop.
//! - [`metrics`]: transport chains, the Goldstein-stationarity proxy, holonomy,
//!   rate fitting.
//! - [`check`]: randomized property suites with independent ODE oracles.
//! - [`harness`]: configuration files, runs, sweeps, CSV and SVG output.

pub mod check;
pub mod error;
pub mod estimator;
pub mod geometry;
pub mod harness;
pub mod metrics;
pub mod optimizer;
pub mod oracles;
pub mod rng;

pub use error::{Error, Result};
pub use geometry::{
    clip_to_ball, AnyManifold, Manifold, ManifoldDescriptor, Mat, Point, Sphere, Stiefel, Tangent,
};
pub use rng::CounterRng;
