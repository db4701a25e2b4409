//! The two-point estimator against the exact Riemannian gradient of a
//! quadratic, then a short zeroth-order sparse PCA run.

use rionc::estimator::{zo_gradient, ZoConfig};
use rionc::optimizer::{plan_schedule, run, GradientSource, RunOptions, TracePolicy, TransportMode};
use rionc::oracles::{full_rgrad, CountingOracle, QuadraticForm, SparsePca, Spectrum};
use rionc::{CounterRng, Manifold, Mat, Sphere};

fn main() -> rionc::Result<()> {
    let sphere = Sphere::new(10)?;
    let a = Mat::from_fn(10, 10, |i, j| if i == j { (i + 1) as f64 } else { 0.1 });
    let quad = QuadraticForm { a };
    let mut rng = CounterRng::new(3);
    let x = sphere.random_point(&mut rng);
    let cfg = ZoConfig::new(0.01, sphere.descriptor())?;

    let mut oracle = CountingOracle::new(&quad);
    let draws = 200_000;
    let mut mean = Mat::zeros(10, 1);
    for _ in 0..draws {
        mean += zo_gradient(&mut oracle, &sphere, &x, &cfg, &mut rng)?.coords();
    }
    mean /= draws as f64;
    let exact = full_rgrad(&quad, &sphere, &x)?;
    println!(
        "{draws} estimates: relative error of the mean {:.4}, {} value queries",
        (&mean - exact.coords()).norm() / exact.norm(),
        oracle.stats().value_queries
    );

    let n = 20;
    let sphere = Sphere::new(n)?;
    let problem = SparsePca::generate(n, &Spectrum::Harmonic, 1, 0.05)?;
    let source = GradientSource::ZerothOrder(ZoConfig::new(0.01, sphere.descriptor())?);
    let opts = RunOptions {
        mode: TransportMode::ParallelTransport,
        source,
        schedule: plan_schedule(50_000, 0.1, 20.0)?,
        trace: TracePolicy::PerEpoch,
    };
    let x0 = sphere.random_point(&mut CounterRng::with_stream(0, 1));
    let r = run(&problem, &sphere, x0, &opts, &mut CounterRng::new(0))?;
    let p = r.proxies();
    println!(
        "zeroth-order run: K = {}, proxy {:.3} -> {:.3}, {} value queries for {} iterations",
        p.len(),
        p[0],
        p[p.len() - 1],
        r.stats.value_queries,
        r.schedule.total_iterations()
    );
    Ok(())
}
