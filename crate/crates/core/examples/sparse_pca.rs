//! Sparse PCA on S^49 with both update rules, printing the per-epoch
//! stationarity proxy every 50 epochs.

use rionc::optimizer::{estimate_grad_bound, run, GradientSource, RunOptions, Schedule, TracePolicy, TransportMode};
use rionc::oracles::{SparsePca, Spectrum, StochasticObjective};
use rionc::{CounterRng, Manifold, Sphere};

fn main() -> rionc::Result<()> {
    let n = 50;
    let sphere = Sphere::new(n)?;
    let problem = SparsePca::generate(n, &Spectrum::Harmonic, 7, 0.1)?;
    let x0 = sphere.random_point(&mut CounterRng::with_stream(0, 1));

    let g = estimate_grad_bound(&problem, &sphere, &x0, &GradientSource::FirstOrder, 1000, &mut CounterRng::with_stream(0, 2))?;
    let schedule = Schedule::explicit(500, 200, 5e-4, None, g)?;
    println!("K = {}, T = {}, D = {:e}, eta = {:.3e}, G = {g:.3}", schedule.epochs, schedule.iterations, schedule.clip_radius, schedule.step_size);

    for mode in [TransportMode::ParallelTransport, TransportMode::Projection] {
        let opts = RunOptions {
            mode,
            source: GradientSource::FirstOrder,
            schedule,
            trace: TracePolicy::PerEpoch,
        };
        let result = run(&problem, &sphere, x0.clone(), &opts, &mut CounterRng::new(0))?;
        let proxies = result.proxies();
        print!("{:>18}:", mode.label());
        for k in (0..proxies.len()).step_by(50) {
            print!(" {:.3}", proxies[k]);
        }
        println!(" | final {:.3}", proxies[proxies.len() - 1]);
        println!(
            "{:>18}  f(w_out) = {:.4} (epoch {}), {} gradient queries",
            "",
            problem.full_value(result.w_out.coords()),
            result.w_out_epoch,
            result.stats.gradient_queries
        );
    }
    Ok(())
}
