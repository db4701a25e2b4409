//! Three sparse components on St(20, 3) with projection updates. Stiefel has
//! no parallel transport here, so the run reports the objective instead of
//! the transported proxy.

use rionc::optimizer::{estimate_grad_bound, plan_schedule, run_observed, GradientSource, RunOptions, TracePolicy, TransportMode};
use rionc::oracles::{SparsePca, Spectrum, StochasticObjective};
use rionc::{CounterRng, Manifold, Stiefel};

fn main() -> rionc::Result<()> {
    let st = Stiefel::new(20, 3)?;
    let problem = SparsePca::generate(20, &Spectrum::Power(1.5), 3, 0.05)?;
    let x0 = st.random_point(&mut CounterRng::with_stream(0, 1));
    let g = estimate_grad_bound(&problem, &st, &x0, &GradientSource::FirstOrder, 1000, &mut CounterRng::with_stream(0, 2))?;
    let opts = RunOptions {
        mode: TransportMode::Projection,
        source: GradientSource::FirstOrder,
        schedule: plan_schedule(50_000, 0.2, g)?,
        trace: TracePolicy::FinalOnly,
    };
    println!("f(X0) = {:.4}", problem.full_value(x0.coords()));
    let mut worst = 0.0f64;
    let r = run_observed(&problem, &st, x0, &opts, &mut CounterRng::new(0), |step| {
        worst = worst.max(step.x_next.feasibility_error());
    })?;
    println!("f(X_end) = {:.4}, f(w_out) = {:.4}", problem.full_value(r.last_point.coords()), problem.full_value(r.w_out.coords()));
    println!("largest |X^T X - I| over {} iterates: {worst:.2e}", r.schedule.total_iterations());
    let x = r.last_point.coords();
    let zeros = x.iter().filter(|v| v.abs() < 1e-2).count();
    println!("{zeros} of {} loadings below 1e-2", x.len());
    Ok(())
}
