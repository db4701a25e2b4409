//! Randomized property suites for the geometry kernels, the retraction order
//! conditions and the gradient estimators.
//!
//! Every case draws from its own rng stream, so the outcome is a function of
//! the seed alone regardless of how many threads evaluate the cases.

use std::fmt;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::{zo_gradient, ZoConfig};
use crate::geometry::{Manifold, Mat, Point, Sphere, Stiefel, Tangent};
use crate::oracles::{full_rgrad, CountingOracle, QuadraticForm, SparsePca, Spectrum};
use crate::rng::CounterRng;

/// Counterexamples kept per report.
pub const MAX_COUNTEREXAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Geometry,
    Estimator,
    All,
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "geometry" => Ok(Suite::Geometry),
            "estimator" => Ok(Suite::Estimator),
            "all" => Ok(Suite::All),
            other => Err(Error::config(format!(
                "unknown suite {other:?} (expected geometry, estimator or all)"
            ))),
        }
    }
}

/// Sizes of the randomized suites.
#[derive(Debug, Clone)]
pub struct CheckConfig {
    pub seed: u64,
    /// Ambient dimensions of the spheres exercised by the geometry suite.
    pub sphere_dims: Vec<usize>,
    pub geometry_cases: usize,
    pub retraction_cases: usize,
    pub feasibility_cases: usize,
    pub feasibility_steps: usize,
    pub zo_points: usize,
    pub zo_draws: usize,
    pub zo_delta: f64,
    pub unbiased_points: usize,
    pub unbiased_draws: usize,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            seed: 0,
            sphere_dims: vec![3, 10, 50],
            geometry_cases: 1000,
            retraction_cases: 200,
            feasibility_cases: 50,
            feasibility_steps: 2000,
            zo_points: 5,
            zo_draws: 1_000_000,
            zo_delta: 0.01,
            unbiased_points: 20,
            unbiased_draws: 100_000,
        }
    }
}

impl CheckConfig {
    /// A reduced configuration for smoke runs.
    pub fn quick(seed: u64) -> Self {
        CheckConfig {
            seed,
            geometry_cases: 100,
            retraction_cases: 40,
            feasibility_cases: 10,
            feasibility_steps: 500,
            zo_points: 2,
            zo_draws: 50_000,
            unbiased_points: 4,
            unbiased_draws: 20_000,
            ..CheckConfig::default()
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Counterexample {
    pub property: String,
    pub case: usize,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct PropertyOutcome {
    pub property: String,
    pub cases: usize,
    pub violations: usize,
    /// Largest observed `measured / bound`.
    pub worst_ratio: f64,
    #[serde(skip)]
    pub counterexamples: Vec<Counterexample>,
}

impl PropertyOutcome {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

impl fmt::Display for PropertyOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {} cases, {} violations, worst ratio {:.3e}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.property,
            self.cases,
            self.violations,
            self.worst_ratio
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub seed: u64,
    pub passed: bool,
    pub properties: Vec<PropertyOutcome>,
    pub counterexamples: Vec<Counterexample>,
}

impl CheckReport {
    pub fn from_outcomes(seed: u64, properties: Vec<PropertyOutcome>) -> Self {
        let counterexamples = properties
            .iter()
            .flat_map(|p| p.counterexamples.iter().cloned())
            .take(MAX_COUNTEREXAMPLES)
            .collect();
        CheckReport {
            seed,
            passed: properties.iter().all(PropertyOutcome::passed),
            properties,
            counterexamples,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// One comparison within a case; violated unless `measured <= bound`.
#[derive(Debug, Clone, Copy)]
pub struct Obs {
    pub check: &'static str,
    pub measured: f64,
    pub bound: f64,
}

impl Obs {
    pub fn new(check: &'static str, measured: f64, bound: f64) -> Self {
        Obs {
            check,
            measured,
            bound,
        }
    }
}

/// Evaluates `cases` independent cases in parallel; case `i` gets the rng
/// stream `(seed, stream, i)`. An error from a case counts as a violation.
pub fn evaluate<F>(property: &str, seed: u64, stream: u64, cases: usize, case: F) -> PropertyOutcome
where
    F: Fn(&mut CounterRng) -> Result<Vec<Obs>> + Sync,
{
    let base = CounterRng::with_stream(seed, stream);
    let results: Vec<Result<Vec<Obs>>> = (0..cases)
        .into_par_iter()
        .map(|i| case(&mut base.fork(i as u64)))
        .collect();

    let mut out = PropertyOutcome {
        property: property.to_string(),
        cases,
        violations: 0,
        worst_ratio: 0.0,
        counterexamples: Vec::new(),
    };
    for (i, r) in results.into_iter().enumerate() {
        let detail = match r {
            Err(e) => Some(format!("error: {e}")),
            Ok(obs) => {
                let mut bad = None;
                for o in obs {
                    let ratio = if o.bound > 0.0 {
                        o.measured / o.bound
                    } else if o.measured == 0.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    };
                    out.worst_ratio = out.worst_ratio.max(if ratio.is_nan() { f64::INFINITY } else { ratio });
                    if !(o.measured <= o.bound) && bad.is_none() {
                        bad = Some(format!(
                            "{}: measured {:.6e} exceeds bound {:.6e}",
                            o.check, o.measured, o.bound
                        ));
                    }
                }
                bad
            }
        };
        if let Some(detail) = detail {
            out.violations += 1;
            if out.counterexamples.len() < MAX_COUNTEREXAMPLES {
                out.counterexamples.push(Counterexample {
                    property: property.to_string(),
                    case: i,
                    detail,
                });
            }
        }
    }
    out
}

fn random_tangent<M: Manifold + ?Sized>(m: &M, x: &Point, scale: f64, rng: &mut CounterRng) -> Result<Tangent> {
    Ok(m.sample_unit_tangent(x, rng)?.scale(scale))
}

/// Random point at geodesic distance `< max_dist` from `x`.
fn nearby<M: Manifold + ?Sized>(m: &M, x: &Point, max_dist: f64, rng: &mut CounterRng) -> Result<Point> {
    let v = random_tangent(m, x, max_dist * rng.uniform(), rng)?;
    m.exp_map(x, &v)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// RK4 integration of the unit-sphere geodesic `g'' = -|g'|^2 g` jointly with
/// the parallel-transport equation `w' = -<w, g'> g` over `t in [0, 1]`.
/// Returns `(g(1), w(1))`.
pub fn rk4_sphere_transport(x: &[f64], v: &[f64], w: &[f64], steps: usize) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let field = |s: &[f64]| -> Vec<f64> {
        let (g, rest) = s.split_at(n);
        let (dg, w) = rest.split_at(n);
        let speed2 = dot(dg, dg);
        let wd = dot(w, dg);
        let mut out = Vec::with_capacity(3 * n);
        out.extend_from_slice(dg);
        out.extend(g.iter().map(|gi| -speed2 * gi));
        out.extend(g.iter().map(|gi| -wd * gi));
        out
    };
    let mut state: Vec<f64> = x.iter().chain(v).chain(w).copied().collect();
    let h = 1.0 / steps as f64;
    let axpy = |s: &[f64], k: &[f64], a: f64| -> Vec<f64> { s.iter().zip(k).map(|(s, k)| s + a * k).collect() };
    for _ in 0..steps {
        let k1 = field(&state);
        let k2 = field(&axpy(&state, &k1, h / 2.0));
        let k3 = field(&axpy(&state, &k2, h / 2.0));
        let k4 = field(&axpy(&state, &k3, h));
        for i in 0..state.len() {
            state[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    (state[..n].to_vec(), state[2 * n..].to_vec())
}

/// Isometry and inner-product preservation of parallel transport, plus the
/// there-and-back round trip.
pub fn transport_isometry<M: Manifold + ?Sized>(m: &M, seed: u64, cases: usize) -> PropertyOutcome {
    let name = format!("transport_isometry[{}]", m.descriptor());
    evaluate(&name, seed, 1, cases, |rng| {
        let x = m.random_point(rng);
        let y = nearby(m, &x, 3.0, rng)?;
        let u = random_tangent(m, &x, 0.1 + 2.0 * rng.uniform(), rng)?;
        let v = random_tangent(m, &x, 0.1 + 2.0 * rng.uniform(), rng)?;
        let tu = m.parallel_transport(&x, &y, &u)?;
        let tv = m.parallel_transport(&x, &y, &v)?;
        let back = m.parallel_transport(&y, &x, &tv)?;
        Ok(vec![
            Obs::new("norm", (tv.norm() - v.norm()).abs(), 1e-10 * v.norm()),
            Obs::new("inner product", (tu.inner(&tv) - u.inner(&v)).abs(), 1e-10 * u.norm() * v.norm()),
            Obs::new("round trip", (back.coords() - v.coords()).norm(), 1e-10 * v.norm().max(1.0)),
            Obs::new("tangency", tv.tangency_error(), 1e-10),
        ])
    })
}

/// `exp(x, log(x, y)) = y` and `|log(x, y)| = dist(x, y)` for random pairs.
pub fn exp_log_roundtrip<M: Manifold + ?Sized>(m: &M, seed: u64, cases: usize) -> PropertyOutcome {
    let name = format!("exp_log_roundtrip[{}]", m.descriptor());
    evaluate(&name, seed, 2, cases, |rng| {
        let x = m.random_point(rng);
        let y = nearby(m, &x, 3.0, rng)?;
        let l = m.log_map(&x, &y)?;
        let back = m.exp_map(&x, &l)?;
        Ok(vec![
            Obs::new("exp(log)", (back.coords() - y.coords()).norm(), 1e-8),
            Obs::new("|log| = dist", (l.norm() - m.dist(&x, &y)?).abs(), 1e-10),
        ])
    })
}

/// Closed-form transport against RK4 integration of the transport ODE along
/// the geodesic. Sphere-specific oracle.
pub fn transport_vs_ode<M: Manifold + ?Sized>(m: &M, seed: u64, cases: usize) -> PropertyOutcome {
    let name = format!("transport_vs_ode[{}]", m.descriptor());
    evaluate(&name, seed, 3, cases, |rng| {
        let x = m.random_point(rng);
        let y = nearby(m, &x, 3.0, rng)?;
        let w = random_tangent(m, &x, 1.0, rng)?;
        let v = m.log_map(&x, &y)?;
        let (end, moved) = rk4_sphere_transport(x.coords().as_slice(), v.coords().as_slice(), w.coords().as_slice(), 1000);
        let closed = m.parallel_transport(&x, &y, &w)?;
        let gap: f64 = closed.coords().iter().zip(&moved).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let end_gap: f64 = y.coords().iter().zip(&end).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        Ok(vec![
            Obs::new("transport vs ODE", gap, 1e-7),
            Obs::new("geodesic endpoint vs ODE", end_gap, 1e-7),
        ])
    })
}

/// Builds a broken geodesic from `x` with the given segment lengths.
pub fn broken_geodesic<M: Manifold + ?Sized>(
    m: &M,
    x: &Point,
    lengths: &[f64],
    rng: &mut CounterRng,
) -> Result<Vec<Point>> {
    let mut pts = vec![x.clone()];
    for &len in lengths {
        let here = pts.last().expect("non-empty");
        let step = random_tangent(m, here, len, rng)?;
        pts.push(m.exp_map(here, &step)?);
    }
    Ok(pts)
}

/// Distortion bound for broken geodesics of total length at most pi/2 with
/// 2 to 5 segments: `|Gamma(v) - P(v)| <= |v| * length` (curvature bound 1).
pub fn broken_geodesic_bound<M: Manifold + ?Sized>(m: &M, seed: u64, cases: usize) -> PropertyOutcome {
    let name = format!("broken_geodesic_bound[{}]", m.descriptor());
    evaluate(&name, seed, 4, cases, |rng| {
        let x = m.random_point(rng);
        let segments = 2 + rng.index(4);
        let total = std::f64::consts::FRAC_PI_2 * rng.uniform();
        let weights: Vec<f64> = (0..segments).map(|_| 0.05 + rng.uniform()).collect();
        let sum: f64 = weights.iter().sum();
        let lengths: Vec<f64> = weights.iter().map(|w| total * w / sum).collect();
        let pts = broken_geodesic(m, &x, &lengths, rng)?;
        let v = random_tangent(m, &x, 0.1 + 2.0 * rng.uniform(), rng)?;
        let mut moved = v.clone();
        for pair in pts.windows(2) {
            moved = m.parallel_transport(&pair[0], &pair[1], &moved)?;
        }
        let end = pts.last().expect("non-empty");
        let projected = m.project_tangent(end, v.coords())?;
        let length: f64 = pts.windows(2).map(|p| m.dist(&p[0], &p[1])).sum::<Result<f64>>()?;
        let defect = (moved.coords() - projected.coords()).norm();
        Ok(vec![Obs::new("defect <= |v| length", defect, v.norm() * length + 1e-12)])
    })
}

/// Self-adjointness, idempotence and tangency of the tangent projection.
pub fn projection_properties<M: Manifold + ?Sized>(m: &M, seed: u64, cases: usize) -> PropertyOutcome {
    let name = format!("projection[{}]", m.descriptor());
    let (r, c) = m.descriptor().shape();
    evaluate(&name, seed, 5, cases, |rng| {
        let x = m.random_point(rng);
        let a = Mat::from_vec(r, c, rng.normals(r * c));
        let b = Mat::from_vec(r, c, rng.normals(r * c));
        let pa = m.project_tangent(&x, &a)?;
        let pb = m.project_tangent(&x, &b)?;
        let again = m.project_tangent(&x, pa.coords())?;
        let scale = a.norm() * b.norm();
        Ok(vec![
            Obs::new("self-adjoint", (pa.coords().dot(&b) - a.dot(pb.coords())).abs(), 1e-12 * scale.max(1.0)),
            Obs::new("idempotent", (again.coords() - pa.coords()).norm(), 1e-12 * a.norm().max(1.0)),
            Obs::new("orthogonal residual", pa.coords().dot(&(&a - pa.coords())).abs(), 1e-12 * a.norm_squared().max(1.0)),
            Obs::new("tangency", pa.tangency_error(), 1e-10),
        ])
    })
}

/// Central-difference bounds on the retraction curve `t -> R_x(t xi)` at
/// `t in {0, 0.25, 0.5}`: speed at most `|xi|` and acceleration at most
/// `|xi|^2`, both within `1e-3` absolute.
pub fn retraction_order<M: Manifold + ?Sized>(m: &M, seed: u64, cases: usize) -> PropertyOutcome {
    let name = format!("retraction_order[{}]", m.descriptor());
    const H: f64 = 1e-4;
    evaluate(&name, seed, 6, cases, |rng| {
        let x = m.random_point(rng);
        let xi = random_tangent(m, &x, 0.1 + 1.9 * rng.uniform(), rng)?;
        let at = |t: f64| m.retract(&x, &xi.scale(t)).map(Point::into_coords);
        let a = xi.norm();
        let mut obs = Vec::with_capacity(6);
        for t in [0.0, 0.25, 0.5] {
            let (lo, mid, hi) = (at(t - H)?, at(t)?, at(t + H)?);
            let first = (&hi - &lo).norm() / (2.0 * H);
            let second = (&hi - &mid * 2.0 + &lo).norm() / (H * H);
            obs.push(Obs::new("first derivative", first, a * (1.0 + 1e-6) + 1e-3));
            obs.push(Obs::new("second derivative", second, a * a + 1e-3));
        }
        Ok(obs)
    })
}

/// Chains of `steps` retractions along random tangents of norm up to 1; every
/// point must satisfy the construction tolerance of its manifold.
pub fn retraction_feasibility<M: Manifold + ?Sized>(
    m: &M,
    seed: u64,
    cases: usize,
    steps: usize,
) -> PropertyOutcome {
    let name = format!("retraction_feasibility[{}]", m.descriptor());
    let tol = m.descriptor().point_tolerance();
    evaluate(&name, seed, 7, cases, |rng| {
        let mut x = m.random_point(rng);
        let mut worst = 0.0f64;
        for _ in 0..steps {
            let v = random_tangent(m, &x, rng.uniform(), rng)?;
            x = m.retract(&x, &v)?;
            worst = worst.max(x.feasibility_error());
        }
        Ok(vec![Obs::new("constraint error", worst, tol)])
    })
}

/// Monte-Carlo mean of the zeroth-order estimator for `f(x) = x^T A x` on
/// `S^{n-1}` against the Riemannian gradient:
/// `|mean - grad| <= 0.05 |grad| + 3 SE`.
pub fn zo_estimator_mean(n: usize, cfg: &CheckConfig) -> Result<PropertyOutcome> {
    let sphere = Sphere::new(n)?;
    let a = {
        let mut rng = CounterRng::with_stream(cfg.seed, 8);
        let b = Mat::from_vec(n, n, rng.normals(n * n));
        (&b + b.transpose()) * 0.5
    };
    let problem = QuadraticForm { a };
    let zo = ZoConfig::new(cfg.zo_delta, crate::geometry::ManifoldDescriptor::Sphere { n })?;
    let draws = cfg.zo_draws;
    Ok(evaluate(&format!("zo_estimator_mean[S^{}]", n - 1), cfg.seed, 9, cfg.zo_points, |rng| {
        let x = sphere.random_point(rng);
        let mut oracle = CountingOracle::new(&problem);
        let mut sum = DVector::<f64>::zeros(n);
        let mut sq = 0.0;
        for _ in 0..draws {
            let g = zo_gradient(&mut oracle, &sphere, &x, &zo, rng)?;
            let g = g.coords().column(0);
            sum += g;
            sq += g.norm_squared();
        }
        let k = draws as f64;
        let mean = sum / k;
        let var = (sq / k - mean.norm_squared()).max(0.0) * k / (k - 1.0);
        let se = (var / k).sqrt();
        let exact = full_rgrad(&problem, &sphere, &x)?;
        let gap = (&mean - exact.coords().column(0)).norm();
        Ok(vec![Obs::new("|mean - grad|", gap, 0.05 * exact.norm() + 3.0 * se)])
    }))
}

/// Componentwise 3-standard-error agreement between the Monte-Carlo mean of
/// the sparse-PCA stochastic gradient and the full gradient, at random points
/// whose coordinates all have magnitude at least 0.05.
pub fn sparse_pca_unbiased(n: usize, cfg: &CheckConfig) -> Result<PropertyOutcome> {
    let sphere = Sphere::new(n)?;
    let problem = SparsePca::generate(n, &Spectrum::Harmonic, cfg.seed, 0.1)?;
    let draws = cfg.unbiased_draws;
    Ok(evaluate(&format!("sparse_pca_unbiased[S^{}]", n - 1), cfg.seed, 10, cfg.unbiased_points, |rng| {
        let x = loop {
            let x = sphere.random_point(rng);
            if x.coords().iter().all(|v| v.abs() >= 0.05) {
                break x;
            }
        };
        let mut oracle = CountingOracle::new(&problem);
        let mut sum = DVector::<f64>::zeros(n);
        let mut sq = DVector::<f64>::zeros(n);
        for _ in 0..draws {
            let nu = oracle.draw_sample(rng);
            let g = oracle.stochastic_rgrad(&sphere, &x, &nu)?;
            let g = g.coords().column(0);
            sum += g;
            sq += g.component_mul(&g);
        }
        let k = draws as f64;
        let mean = &sum / k;
        let exact = full_rgrad(&problem, &sphere, &x)?;
        let mut obs = Vec::with_capacity(n);
        for i in 0..n {
            let var = (sq[i] / k - mean[i] * mean[i]).max(0.0) * k / (k - 1.0);
            let se = (var / k).sqrt();
            obs.push(Obs::new("component within 3 SE", (mean[i] - exact.coords()[i]).abs(), 3.0 * se));
        }
        Ok(obs)
    }))
}

pub fn geometry_outcomes(cfg: &CheckConfig) -> Result<Vec<PropertyOutcome>> {
    let mut out = Vec::new();
    for &n in &cfg.sphere_dims {
        let s = Sphere::new(n)?;
        out.push(transport_isometry(&s, cfg.seed, cfg.geometry_cases));
        out.push(exp_log_roundtrip(&s, cfg.seed, cfg.geometry_cases));
        out.push(transport_vs_ode(&s, cfg.seed, cfg.geometry_cases));
        out.push(broken_geodesic_bound(&s, cfg.seed, cfg.geometry_cases));
        out.push(projection_properties(&s, cfg.seed, cfg.geometry_cases));
    }
    out.extend(retraction_outcomes(cfg)?);
    Ok(out)
}

/// Retraction order and feasibility on spheres up to `S^19` and Stiefel
/// manifolds up to `St(20, 5)`.
pub fn retraction_outcomes(cfg: &CheckConfig) -> Result<Vec<PropertyOutcome>> {
    let per = (cfg.retraction_cases / 4).max(1);
    let mut out = Vec::new();
    for n in [3, 20] {
        let s = Sphere::new(n)?;
        out.push(retraction_order(&s, cfg.seed, per));
        out.push(retraction_feasibility(&s, cfg.seed, cfg.feasibility_cases, cfg.feasibility_steps));
    }
    for (n, p) in [(5, 2), (20, 5)] {
        let st = Stiefel::new(n, p)?;
        out.push(retraction_order(&st, cfg.seed, per));
        out.push(retraction_feasibility(&st, cfg.seed, cfg.feasibility_cases, cfg.feasibility_steps));
        out.push(projection_properties(&st, cfg.seed, cfg.geometry_cases));
    }
    Ok(out)
}

pub fn estimator_outcomes(cfg: &CheckConfig) -> Result<Vec<PropertyOutcome>> {
    Ok(vec![zo_estimator_mean(10, cfg)?, sparse_pca_unbiased(10, cfg)?])
}

pub fn run_checks(suite: Suite, cfg: &CheckConfig) -> Result<CheckReport> {
    let mut outcomes = Vec::new();
    if matches!(suite, Suite::Geometry | Suite::All) {
        outcomes.extend(geometry_outcomes(cfg)?);
    }
    if matches!(suite, Suite::Estimator | Suite::All) {
        outcomes.extend(estimator_outcomes(cfg)?);
    }
    Ok(CheckReport::from_outcomes(cfg.seed, outcomes))
}
