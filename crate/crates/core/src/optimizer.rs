//! Riemannian online-to-nonconvex optimizer.
//!
//! `K` epochs of `T` iterations. Each epoch restarts the online state at
//! `Delta = 0` from the last point of the previous epoch. One iteration:
//!
//! ```text
//! x_{t+1} = R_{x_t}(Delta_t)
//! w_t     = R_{x_t}(s_t Delta_t),   s_t ~ unif[0, 1]
//! g_t     = stochastic gradient (or zeroth-order estimate) at w_t
//! Delta_{t+1} = clip_D( Gamma_{x_t -> x_{t+1}} Delta_t - eta Gamma_{w_t -> x_{t+1}} g_t )   (transport)
//! Delta_{t+1} = clip_D( P_{x_{t+1}} (Delta_t - eta g_t) )                                     (projection)
//! ```
//!
//! The epoch representative is `w_{floor(T/2)}`; the output is one
//! representative drawn uniformly at random.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{zo_gradient, ZoConfig};
use crate::geometry::{clip_to_ball, Manifold, Point, Tangent};
use crate::metrics::{ProxyAccumulator, ProxyReport};
use crate::oracles::{full_rgrad, CountingOracle, OracleStats, StochasticObjective};
use crate::rng::CounterRng;

/// Smallest admissible number of iterations per epoch.
pub const MIN_ITERATIONS: usize = 8;
/// Smallest total budget accepted by [`plan_schedule`].
pub const MIN_ROUNDS: usize = 64;
/// Full traces above this many iterations are refused.
pub const MAX_FULL_TRACE_ITERATIONS: usize = 1_000_000;
/// Constraint violation at which a run aborts.
pub const RUN_FEASIBILITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    /// Requested budget `N`; `epochs * iterations <= rounds`.
    pub rounds: usize,
    /// Goldstein radius, `clip_radius * iterations`.
    pub delta: f64,
    pub iterations: usize,
    pub epochs: usize,
    pub clip_radius: f64,
    pub step_size: f64,
    /// Gradient second-moment bound `G` used for the step size.
    pub grad_bound: f64,
}

fn ceil_two_thirds_power(v: f64) -> usize {
    let r = v.powf(2.0 / 3.0);
    let nearest = r.round();
    // (10^3)^(2/3) must give 100, not 101.
    if (r - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as usize
    } else {
        r.ceil() as usize
    }
}

/// `T = max(8, ceil((delta N)^(2/3)))`, `K = floor(N / T)`, `D = delta / T`,
/// `eta = D / (G sqrt(T))`.
pub fn plan_schedule(rounds: usize, delta: f64, grad_bound: f64) -> Result<Schedule> {
    if rounds < MIN_ROUNDS {
        return Err(Error::config(format!(
            "budget N = {rounds} is too small; need N >= {MIN_ROUNDS}"
        )));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::config(format!("delta must lie in (0, 1], got {delta}")));
    }
    if !(grad_bound > 0.0) || !grad_bound.is_finite() {
        return Err(Error::config(format!("gradient bound must be positive, got {grad_bound}")));
    }
    let iterations = ceil_two_thirds_power(delta * rounds as f64).max(MIN_ITERATIONS);
    let epochs = rounds / iterations;
    if epochs < 1 {
        return Err(Error::config(format!(
            "budget N = {rounds} admits no full epoch of T = {iterations}"
        )));
    }
    let clip_radius = delta / iterations as f64;
    Ok(Schedule {
        rounds,
        delta: clip_radius * iterations as f64,
        iterations,
        epochs,
        clip_radius,
        step_size: clip_radius / (grad_bound * (iterations as f64).sqrt()),
        grad_bound,
    })
}

impl Schedule {
    /// Fixed `K`, `T`, `D`. The step size defaults to `D / (G sqrt(T))`.
    pub fn explicit(
        epochs: usize,
        iterations: usize,
        clip_radius: f64,
        step_size: Option<f64>,
        grad_bound: f64,
    ) -> Result<Self> {
        if epochs < 1 {
            return Err(Error::config("need at least one epoch"));
        }
        if iterations < MIN_ITERATIONS {
            return Err(Error::config(format!(
                "iterations per epoch must be >= {MIN_ITERATIONS}, got {iterations}"
            )));
        }
        if !(clip_radius > 0.0) || !clip_radius.is_finite() {
            return Err(Error::config(format!("clip radius must be positive, got {clip_radius}")));
        }
        if !(grad_bound > 0.0) || !grad_bound.is_finite() {
            return Err(Error::config(format!("gradient bound must be positive, got {grad_bound}")));
        }
        let step_size =
            step_size.unwrap_or(clip_radius / (grad_bound * (iterations as f64).sqrt()));
        if !(step_size > 0.0) || !step_size.is_finite() {
            return Err(Error::config(format!("step size must be positive, got {step_size}")));
        }
        Ok(Schedule {
            rounds: epochs * iterations,
            delta: clip_radius * iterations as f64,
            iterations,
            epochs,
            clip_radius,
            step_size,
            grad_bound,
        })
    }

    pub fn total_iterations(&self) -> usize {
        self.epochs * self.iterations
    }
}

/// `min(delta, epsilon / (6 L C))`: the radius that trades the additive
/// curvature term for a target stationarity level.
pub fn reduced_delta(delta: f64, target_epsilon: f64, lipschitz: f64, curvature: f64) -> f64 {
    let denom = 6.0 * lipschitz * curvature;
    if denom > 0.0 {
        delta.min(target_epsilon / denom)
    } else {
        delta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportMode {
    ParallelTransport,
    Projection,
}

impl TransportMode {
    pub fn label(&self) -> &'static str {
        match self {
            TransportMode::ParallelTransport => "parallel_transport",
            TransportMode::Projection => "projection",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GradientSource {
    FirstOrder,
    ZerothOrder(ZoConfig),
}

impl GradientSource {
    pub fn label(&self) -> &'static str {
        match self {
            GradientSource::FirstOrder => "first_order",
            GradientSource::ZerothOrder(_) => "zeroth_order",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TracePolicy {
    /// Every iterate of every epoch.
    Full,
    /// Proxy per epoch, no iterates.
    #[default]
    PerEpoch,
    /// Proxy of the last epoch only.
    FinalOnly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub mode: TransportMode,
    pub source: GradientSource,
    pub schedule: Schedule,
    pub trace: TracePolicy,
}

/// Iterates of one epoch: `xs` and `deltas` have `T + 1` entries, the rest
/// `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochTrace {
    pub xs: Vec<Point>,
    pub ws: Vec<Point>,
    pub deltas: Vec<Tangent>,
    pub s: Vec<f64>,
    pub grads: Vec<Tangent>,
    pub w_bar: Point,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IterateTrace {
    pub epochs: Vec<EpochTrace>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub proxy: Option<ProxyReport>,
    /// Cumulative at the end of the epoch.
    pub stats: OracleStats,
    /// Cumulative wall-clock time at the end of the epoch.
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub w_out: Point,
    /// 1-based epoch whose representative was drawn.
    pub w_out_epoch: usize,
    pub last_point: Point,
    pub epochs: Vec<EpochRecord>,
    pub stats: OracleStats,
    pub schedule: Schedule,
    pub seed: u64,
    pub trace: Option<IterateTrace>,
}

impl RunResult {
    pub fn proxies(&self) -> Vec<f64> {
        self.epochs
            .iter()
            .filter_map(|e| e.proxy.map(|p| p.proxy))
            .collect()
    }
}

/// Everything known about one iteration, handed to run observers.
#[derive(Debug)]
pub struct StepView<'a> {
    /// 1-based epoch.
    pub epoch: usize,
    pub t: usize,
    pub x: &'a Point,
    pub x_next: &'a Point,
    pub w: &'a Point,
    pub s: f64,
    pub delta: &'a Tangent,
    pub delta_next: &'a Tangent,
    pub grad: &'a Tangent,
}

/// Operands of a single online update.
#[derive(Debug, Clone, Copy)]
pub struct StepInput<'a> {
    pub x: &'a Point,
    pub x_next: &'a Point,
    /// Anchor of `grad`.
    pub w: &'a Point,
    /// Anchored at `x`.
    pub delta: &'a Tangent,
    pub grad: &'a Tangent,
}

pub fn step_parallel_transport<M: Manifold + ?Sized>(
    manifold: &M,
    input: StepInput<'_>,
    step_size: f64,
    clip_radius: f64,
) -> Result<Tangent> {
    let carried = manifold.parallel_transport(input.x, input.x_next, input.delta)?;
    let grad = manifold.parallel_transport(input.w, input.x_next, input.grad)?;
    Ok(clip_to_ball(&carried.axpy(-step_size, &grad)?, clip_radius))
}

pub fn step_projection<M: Manifold + ?Sized>(
    manifold: &M,
    input: StepInput<'_>,
    step_size: f64,
    clip_radius: f64,
) -> Result<Tangent> {
    let ambient = input.delta.coords() - input.grad.coords() * step_size;
    let projected = manifold.project_tangent(input.x_next, &ambient)?;
    Ok(clip_to_ball(&projected, clip_radius))
}

fn gradient_at<M, P>(
    oracle: &mut CountingOracle<'_, P>,
    manifold: &M,
    source: &GradientSource,
    w: &Point,
    rng: &mut CounterRng,
) -> Result<Tangent>
where
    M: Manifold + ?Sized,
    P: StochasticObjective + ?Sized,
{
    match source {
        GradientSource::FirstOrder => {
            let nu = oracle.draw_sample(rng);
            oracle.stochastic_rgrad(manifold, w, &nu)
        }
        GradientSource::ZerothOrder(cfg) => zo_gradient(oracle, manifold, w, cfg, rng),
    }
}

/// `1.1 * sqrt(mean |g|^2)` over `draws` gradients at `x0`, using a separate
/// oracle so the run's own query counts are unaffected. Returns 1 when every
/// draw vanishes.
pub fn estimate_grad_bound<M, P>(
    problem: &P,
    manifold: &M,
    x0: &Point,
    source: &GradientSource,
    draws: usize,
    rng: &mut CounterRng,
) -> Result<f64>
where
    M: Manifold + ?Sized,
    P: StochasticObjective + ?Sized,
{
    let mut oracle = CountingOracle::new(problem);
    let mut total = 0.0;
    for _ in 0..draws.max(1) {
        total += gradient_at(&mut oracle, manifold, source, x0, rng)?.coords().norm_squared();
    }
    let g = 1.1 * (total / draws.max(1) as f64).sqrt();
    Ok(if g > 0.0 && g.is_finite() { g } else { 1.0 })
}

/// `sqrt(mean L(nu)^2)` when the objective reports per-sample Lipschitz
/// constants.
pub fn estimate_lipschitz<P: StochasticObjective + ?Sized>(
    problem: &P,
    draws: usize,
    rng: &mut CounterRng,
) -> Option<f64> {
    let mut total = 0.0;
    for _ in 0..draws.max(1) {
        let l = problem.lipschitz(&problem.draw_payload(rng))?;
        total += l * l;
    }
    Some((total / draws.max(1) as f64).sqrt())
}

fn ensure_feasible(p: &Point, what: &str, epoch: usize, t: usize) -> Result<()> {
    let err = p.feasibility_error();
    if !(err <= RUN_FEASIBILITY_TOL) {
        return Err(Error::Numerical(format!(
            "{what} left the manifold at epoch {epoch}, iteration {t}: constraint error {err:.3e}"
        )));
    }
    Ok(())
}

pub fn run<M, P>(
    problem: &P,
    manifold: &M,
    x0: Point,
    options: &RunOptions,
    rng: &mut CounterRng,
) -> Result<RunResult>
where
    M: Manifold + ?Sized,
    P: StochasticObjective + ?Sized,
{
    run_observed(problem, manifold, x0, options, rng, |_| {})
}

/// [`run`], calling `observer` after every iteration.
pub fn run_observed<M, P, F>(
    problem: &P,
    manifold: &M,
    x0: Point,
    options: &RunOptions,
    rng: &mut CounterRng,
    mut observer: F,
) -> Result<RunResult>
where
    M: Manifold + ?Sized,
    P: StochasticObjective + ?Sized,
    F: FnMut(&StepView<'_>),
{
    let schedule = options.schedule;
    manifold.check_point(&x0)?;
    if options.mode == TransportMode::ParallelTransport && !manifold.supports_parallel_transport() {
        return Err(Error::config(format!(
            "{} does not support parallel transport; use the projection mode",
            manifold.descriptor()
        )));
    }
    if let GradientSource::ZerothOrder(_) = options.source {
        if !manifold.supports_exp_map() {
            return Err(Error::config(format!(
                "{} has no exponential map; the zeroth-order estimator needs one",
                manifold.descriptor()
            )));
        }
    }
    if options.trace == TracePolicy::Full
        && schedule.total_iterations() > MAX_FULL_TRACE_ITERATIONS
    {
        return Err(Error::Resource(format!(
            "full trace of {} iterations exceeds the limit of {MAX_FULL_TRACE_ITERATIONS}",
            schedule.total_iterations()
        )));
    }

    let started = Instant::now();
    let seed = rng.seed();
    let (epochs_k, iters_t) = (schedule.epochs, schedule.iterations);
    let (eta, clip) = (schedule.step_size, schedule.clip_radius);
    let proxy_capable = manifold.supports_parallel_transport();

    let mut oracle = CountingOracle::new(problem);
    let mut trace = (options.trace == TracePolicy::Full).then(IterateTrace::default);
    let mut records = Vec::with_capacity(epochs_k);
    let mut representatives = Vec::with_capacity(epochs_k);
    let mut x = x0;

    for k in 1..=epochs_k {
        let want_proxy = proxy_capable
            && match options.trace {
                TracePolicy::Full | TracePolicy::PerEpoch => true,
                TracePolicy::FinalOnly => k == epochs_k,
            };
        let mut delta = Tangent::zero(x.clone());
        let mut acc = want_proxy.then(|| ProxyAccumulator::new(&x));
        let mut epoch_trace = trace.as_ref().map(|_| EpochTrace {
            xs: vec![x.clone()],
            ws: Vec::with_capacity(iters_t),
            deltas: vec![delta.clone()],
            s: Vec::with_capacity(iters_t),
            grads: Vec::with_capacity(iters_t),
            w_bar: x.clone(),
        });
        let mut w_bar = None;

        for t in 0..iters_t {
            let x_next = manifold.retract(&x, &delta)?;
            ensure_feasible(&x_next, "iterate", k, t)?;
            let s = rng.uniform();
            let w = manifold.retract(&x, &delta.scale(s))?;
            ensure_feasible(&w, "gradient point", k, t)?;
            let grad = gradient_at(&mut oracle, manifold, &options.source, &w, rng)?;

            let input = StepInput {
                x: &x,
                x_next: &x_next,
                w: &w,
                delta: &delta,
                grad: &grad,
            };
            let delta_next = match options.mode {
                TransportMode::ParallelTransport => {
                    step_parallel_transport(manifold, input, eta, clip)?
                }
                TransportMode::Projection => step_projection(manifold, input, eta, clip)?,
            };

            if let Some(acc) = acc.as_mut() {
                let full = full_rgrad(problem, manifold, &w)?;
                let moved = manifold.parallel_transport(&w, &x_next, &full)?;
                let (a, b) = (moved.norm(), full.norm());
                if (a - b).abs() > 1e-9 * b.max(1.0) {
                    return Err(Error::Numerical(format!(
                        "transport changed a gradient norm at epoch {k}, iteration {t}: {a} vs {b}"
                    )));
                }
                acc.push(manifold, &x, &x_next, &moved)?;
            }

            observer(&StepView {
                epoch: k,
                t,
                x: &x,
                x_next: &x_next,
                w: &w,
                s,
                delta: &delta,
                delta_next: &delta_next,
                grad: &grad,
            });

            if t == iters_t / 2 {
                w_bar = Some(w.clone());
            }
            if let Some(et) = epoch_trace.as_mut() {
                et.xs.push(x_next.clone());
                et.ws.push(w);
                et.deltas.push(delta_next.clone());
                et.s.push(s);
                et.grads.push(grad);
            }
            x = x_next;
            delta = delta_next;
        }

        let w_bar = w_bar.expect("epochs have at least MIN_ITERATIONS iterations");
        if let (Some(tr), Some(mut et)) = (trace.as_mut(), epoch_trace) {
            et.w_bar = w_bar.clone();
            tr.epochs.push(et);
        }
        representatives.push(w_bar);
        records.push(EpochRecord {
            epoch: k,
            proxy: acc.map(|a| ProxyReport {
                epoch: k,
                proxy: a.value(),
                clip_radius: clip,
                delta: schedule.delta,
                terms: a.terms(),
            }),
            stats: oracle.stats(),
            elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
        });
    }

    let pick = rng.index(representatives.len());
    Ok(RunResult {
        w_out: representatives.swap_remove(pick),
        w_out_epoch: pick + 1,
        last_point: x,
        epochs: records,
        stats: oracle.stats(),
        schedule,
        seed,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;
    use crate::geometry::{Mat, Sphere, Stiefel};
    use crate::oracles::{ConstantObjective, SparsePca, Spectrum};

    #[test]
    fn schedule_examples() {
        let s = plan_schedule(100_000, 0.1, 1.0).unwrap();
        assert_eq!(s.iterations, 465);
        assert_eq!(s.epochs, 215);
        assert_abs_diff_eq!(s.clip_radius, 0.1 / 465.0, epsilon = 1e-18);
        assert_eq!(s.delta, s.clip_radius * 465.0);

        let s = plan_schedule(100_000, 1.0, 1.0).unwrap();
        assert_eq!(s.iterations, 2155);
        assert_eq!(s.epochs, 46);

        // delta N = 10 < 8^{3/2}
        let s = plan_schedule(100, 0.1, 1.0).unwrap();
        assert_eq!(s.iterations, 8);
        assert_eq!(s.epochs, 12);

        let s = plan_schedule(10_000, 0.1, 2.0).unwrap();
        assert_eq!(s.iterations, 100);
        assert_abs_diff_eq!(s.step_size, s.clip_radius / (2.0 * 10.0), epsilon = 1e-18);
    }

    #[test]
    fn schedule_rejects_bad_inputs() {
        assert!(plan_schedule(63, 0.5, 1.0).is_err());
        assert!(plan_schedule(1000, 1.5, 1.0).is_err());
        assert!(plan_schedule(1000, 0.0, 1.0).is_err());
        assert!(plan_schedule(1000, 0.1, 0.0).is_err());
        assert!(Schedule::explicit(1, 7, 0.1, None, 1.0).is_err());
        assert!(Schedule::explicit(0, 8, 0.1, None, 1.0).is_err());
    }

    #[test]
    fn schedule_invariants_over_budgets() {
        for &n in &[64usize, 100, 999, 1000, 12_345, 100_000, 1_000_000] {
            for &d in &[0.01, 0.1, 0.5, 0.9] {
                let s = plan_schedule(n, d, 1.5).unwrap();
                assert!(s.iterations >= MIN_ITERATIONS);
                assert!(s.epochs >= 1);
                assert!(s.epochs * s.iterations <= n);
                assert_eq!(s.delta, s.clip_radius * s.iterations as f64);
            }
        }
    }

    #[test]
    fn reduced_delta_takes_minimum() {
        assert_eq!(reduced_delta(0.1, 0.7, 1.0, 1.0), 0.1);
        assert_abs_diff_eq!(reduced_delta(0.1, 0.06, 1.0, 1.0), 0.01, epsilon = 1e-15);
        assert_eq!(reduced_delta(0.1, 0.06, 0.0, 1.0), 0.1);
    }

    #[test]
    fn zero_oracle_keeps_iterates_fixed() {
        let m = Sphere::new(4).unwrap();
        let p = ConstantObjective { value: 1.0, shape: (4, 1) };
        let mut rng = CounterRng::new(0);
        let x0 = m.random_point(&mut rng);
        let opts = RunOptions {
            mode: TransportMode::ParallelTransport,
            source: GradientSource::FirstOrder,
            schedule: Schedule::explicit(3, 8, 0.01, None, 1.0).unwrap(),
            trace: TracePolicy::Full,
        };
        let r = run(&p, &m, x0.clone(), &opts, &mut rng).unwrap();
        assert_eq!(r.w_out, x0);
        for e in &r.trace.as_ref().unwrap().epochs {
            assert!(e.xs.iter().all(|x| *x == x0));
            assert!(e.ws.iter().all(|x| *x == x0));
            assert!(e.deltas.iter().all(|d| d.norm() == 0.0));
        }
        assert!(r.proxies().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn capability_mismatch_is_rejected() {
        let m = Stiefel::new(4, 2).unwrap();
        let p = ConstantObjective { value: 0.0, shape: (4, 2) };
        let mut rng = CounterRng::new(0);
        let x0 = m.random_point(&mut rng);
        let schedule = Schedule::explicit(1, 8, 0.01, None, 1.0).unwrap();
        let mut opts = RunOptions {
            mode: TransportMode::ParallelTransport,
            source: GradientSource::FirstOrder,
            schedule,
            trace: TracePolicy::PerEpoch,
        };
        assert!(matches!(run(&p, &m, x0.clone(), &opts, &mut rng), Err(Error::Config(_))));
        opts.mode = TransportMode::Projection;
        opts.source = GradientSource::ZerothOrder(ZoConfig::new(0.1, m.descriptor()).unwrap());
        assert!(matches!(run(&p, &m, x0.clone(), &opts, &mut rng), Err(Error::Config(_))));
        opts.source = GradientSource::FirstOrder;
        let r = run(&p, &m, x0, &opts, &mut rng).unwrap();
        assert!(r.epochs[0].proxy.is_none());
    }

    #[test]
    fn full_trace_guard() {
        let m = Sphere::new(3).unwrap();
        let p = ConstantObjective { value: 0.0, shape: (3, 1) };
        let mut rng = CounterRng::new(0);
        let x0 = m.random_point(&mut rng);
        let opts = RunOptions {
            mode: TransportMode::Projection,
            source: GradientSource::FirstOrder,
            schedule: Schedule::explicit(1001, 1000, 0.01, None, 1.0).unwrap(),
            trace: TracePolicy::Full,
        };
        assert!(matches!(run(&p, &m, x0, &opts, &mut rng), Err(Error::Resource(_))));
    }

    #[test]
    fn epoch_start_step_is_clipped_negative_gradient() {
        let m = Sphere::new(3).unwrap();
        let x = Point::sphere(&[1.0, 0.0, 0.0]).unwrap();
        let g = Tangent::new(x.clone(), Mat::from_column_slice(3, 1, &[0.0, 3.0, -4.0])).unwrap();
        let zero = Tangent::zero(x.clone());
        let input = StepInput { x: &x, x_next: &x, w: &x, delta: &zero, grad: &g };
        for d in [step_parallel_transport(&m, input, 0.1, 0.2).unwrap(), step_projection(&m, input, 0.1, 0.2).unwrap()] {
            let want = clip_to_ball(&g.scale(-0.1), 0.2);
            assert!((d.coords() - want.coords()).norm() < 1e-16);
            assert!(d.norm() <= 0.2);
        }
        let zero_g = Tangent::zero(x.clone());
        let input = StepInput { x: &x, x_next: &x, w: &x, delta: &zero, grad: &zero_g };
        assert_eq!(step_projection(&m, input, 0.1, 0.2).unwrap().norm(), 0.0);
    }

    #[test]
    fn runs_are_deterministic_and_counted() {
        let m = Sphere::new(6).unwrap();
        let p = SparsePca::generate(6, &Spectrum::Harmonic, 1, 0.1).unwrap();
        let opts = RunOptions {
            mode: TransportMode::ParallelTransport,
            source: GradientSource::FirstOrder,
            schedule: Schedule::explicit(4, 10, 0.01, Some(1e-3), 1.0).unwrap(),
            trace: TracePolicy::PerEpoch,
        };
        let go = || {
            let mut rng = CounterRng::new(5);
            let x0 = m.random_point(&mut rng);
            run(&p, &m, x0, &opts, &mut rng).unwrap()
        };
        let (a, b) = (go(), go());
        assert_eq!(a.w_out, b.w_out);
        assert_eq!(a.proxies(), b.proxies());
        assert_eq!(a.stats.gradient_queries, 40);
        assert_eq!(a.stats.samples_drawn, 40);
        assert_eq!(a.stats.value_queries, 0);
        assert_eq!(a.epochs.last().unwrap().stats, a.stats);
    }
}
