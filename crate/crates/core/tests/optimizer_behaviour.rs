use std::path::PathBuf;

use proptest::prelude::*;
use rionc::harness::record::trace_text;
use rionc::metrics::goldstein_proxy;
use rionc::oracles::{full_rgrad, SparsePca, Spectrum};
use rionc::optimizer::{
    run, run_observed, step_parallel_transport, step_projection, EpochTrace, GradientSource, RunOptions, Schedule,
    StepInput, TracePolicy, TransportMode,
};
use rionc::{clip_to_ball, CounterRng, Manifold, Point, Sphere, Tangent};

struct Setup {
    s: Sphere,
    x: Point,
    x_next: Point,
    w: Point,
    delta: Tangent,
    grad: Tangent,
}

fn setup(n: usize, seed: u64, radius: f64, grad_scale: f64) -> Setup {
    let s = Sphere::new(n).unwrap();
    let mut rng = CounterRng::new(seed);
    let x = s.random_point(&mut rng);
    let delta = s.sample_unit_tangent(&x, &mut rng).unwrap().scale(radius * rng.uniform());
    let x_next = s.retract(&x, &delta).unwrap();
    let w = s.retract(&x, &delta.scale(rng.uniform())).unwrap();
    let grad = s.sample_unit_tangent(&w, &mut rng).unwrap().scale(grad_scale);
    Setup { s, x, x_next, w, delta, grad }
}

fn updates(c: &Setup, eta: f64, clip: f64) -> (Tangent, Tangent) {
    let input = StepInput { x: &c.x, x_next: &c.x_next, w: &c.w, delta: &c.delta, grad: &c.grad };
    (
        step_parallel_transport(&c.s, input, eta, clip).unwrap(),
        step_projection(&c.s, input, eta, clip).unwrap(),
    )
}

#[test]
fn transport_update_approaches_euclidean_update_in_a_small_patch() {
    for seed in 0..20 {
        let c = setup(6, seed, 1e-6, 1.0);
        let eta = 1e-7;
        let (pt, proj) = updates(&c, eta, 1e-6);
        // Euclidean update Delta - eta g, tangent-projected at x_next and clipped.
        let raw = c.delta.coords() - c.grad.coords() * eta;
        let eucl = clip_to_ball(&c.s.project_tangent(&c.x_next, &raw).unwrap(), 1e-6);
        let scale = eucl.norm();
        let gap = (pt.coords() - eucl.coords()).norm();
        assert!(gap <= 1e-9 * scale, "{gap} vs {scale}");
        assert!((proj.coords() - eucl.coords()).norm() <= 1e-12 * scale.max(1e-300) + 1e-300);
    }
}

#[test]
fn epoch_trace_of_fixed_seed_matches_golden() {
    let p = SparsePca::generate(5, &Spectrum::Harmonic, 7, 0.1).unwrap();
    let s = Sphere::new(5).unwrap();
    let x0 = s.random_point(&mut CounterRng::new(1));
    let opts = RunOptions {
        mode: TransportMode::ParallelTransport,
        source: GradientSource::FirstOrder,
        schedule: Schedule::explicit(1, 8, 0.05, None, 1.0).unwrap(),
        trace: TracePolicy::Full,
    };
    let r = run(&p, &s, x0, &opts, &mut CounterRng::new(11)).unwrap();
    let text = trace_text(r.trace.as_ref().unwrap());
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/sphere5_t8.trace");
    if std::env::var_os("RIONC_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, &text).unwrap();
    }
    let golden = std::fs::read_to_string(&path).expect("golden trace missing; rerun with RIONC_BLESS=1");
    assert_eq!(text, golden);
}

#[test]
fn proxy_in_a_small_patch_is_the_euclidean_gradient_average() {
    let p = SparsePca::generate(8, &Spectrum::Harmonic, 2, 0.1).unwrap();
    let s = Sphere::new(8).unwrap();
    let x0 = s.random_point(&mut CounterRng::new(4));
    let opts = RunOptions {
        mode: TransportMode::ParallelTransport,
        source: GradientSource::FirstOrder,
        schedule: Schedule::explicit(2, 50, 2e-7, None, 1.0).unwrap(),
        trace: TracePolicy::Full,
    };
    let r = run(&p, &s, x0, &opts, &mut CounterRng::new(5)).unwrap();
    let trace = r.trace.unwrap();
    for (e, rec) in trace.epochs.iter().zip(&r.epochs) {
        let base = &e.xs[0];
        let mut sum = rionc::Mat::zeros(8, 1);
        for w in &e.ws {
            sum += full_rgrad(&p, &s, w).unwrap().coords();
        }
        let flat = s.project_tangent(base, &sum).unwrap().norm() / e.ws.len() as f64;
        let proxy = rec.proxy.unwrap().proxy;
        assert!((proxy - flat).abs() <= 1e-5 * flat, "{proxy} vs {flat}");
    }
}

#[test]
fn single_term_proxy_is_the_gradient_norm() {
    let c = setup(5, 3, 0.1, 1.0);
    let trace = EpochTrace {
        xs: vec![c.x.clone(), c.x_next.clone()],
        ws: vec![c.w.clone()],
        deltas: vec![Tangent::zero(c.x.clone()), c.delta.clone()],
        s: vec![0.5],
        grads: vec![c.grad.clone()],
        w_bar: c.w.clone(),
    };
    let g = c.grad.clone();
    let rep = goldstein_proxy(&c.s, &trace, 1, 0.1, |_| Ok(g.clone())).unwrap();
    assert!((rep.proxy - 1.0).abs() <= 1e-12);
    assert_eq!(rep.terms, 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transport_and_projection_updates_stay_close(
        seed in any::<u64>(), n in 3usize..20, radius in 1e-4f64..0.5, eta in 1e-4f64..0.5
    ) {
        let c = setup(n, seed, radius, 1.0);
        let (pt, proj) = updates(&c, eta, radius);
        prop_assert!(pt.norm() <= radius * (1.0 + 1e-12));
        prop_assert!(proj.norm() <= radius * (1.0 + 1e-12));
        prop_assert!(pt.tangency_error() <= 1e-12 && proj.tangency_error() <= 1e-12);
        let d1 = c.s.dist(&c.x, &c.x_next).unwrap();
        let d2 = c.s.dist(&c.w, &c.x_next).unwrap();
        let bound = 2.0 * d1.max(d2) * (c.delta.norm() + eta * c.grad.norm());
        prop_assert!((pt.coords() - proj.coords()).norm() <= bound + 1e-15);
    }

    #[test]
    fn iterates_move_at_most_the_clip_radius(seed in any::<u64>(), radius in 1e-4f64..0.3, projection in any::<bool>()) {
        let p = SparsePca::generate(6, &Spectrum::Harmonic, seed, 0.1).unwrap();
        let s = Sphere::new(6).unwrap();
        let x0 = s.random_point(&mut CounterRng::new(seed));
        let opts = RunOptions {
            mode: if projection { TransportMode::Projection } else { TransportMode::ParallelTransport },
            source: GradientSource::FirstOrder,
            schedule: Schedule::explicit(3, 8, radius, Some(radius), 1.0).unwrap(),
            trace: TracePolicy::PerEpoch,
        };
        let mut worst = 0.0f64;
        run_observed(&p, &s, x0, &opts, &mut CounterRng::new(seed ^ 7), |v| {
            let d = s.dist(v.x, v.x_next).unwrap().max(s.dist(v.x, v.w).unwrap());
            worst = worst.max(d / radius);
            assert!(v.delta_next.norm() <= radius * (1.0 + 1e-12));
        })
        .unwrap();
        prop_assert!(worst <= 1.0 + 1e-8);
    }
}
