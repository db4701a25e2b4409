use nalgebra::DVector;
use proptest::prelude::*;
use rionc::estimator::{zo_gradient, ZoConfig};
use rionc::oracles::{full_rgrad, CountingOracle, LinearObjective, SparsePca, Spectrum, StochasticObjective};
use rionc::{CounterRng, Manifold, Mat, Point, Sphere};

#[test]
fn payload_covariance_matches_matrix() {
    let p = SparsePca::generate(6, &Spectrum::Harmonic, 3, 0.1).unwrap();
    let mut rng = CounterRng::new(1);
    let draws = 100_000;
    let mut cov = Mat::zeros(6, 6);
    for _ in 0..draws {
        let nu = p.draw_payload(&mut rng);
        cov += &nu * nu.transpose();
    }
    cov /= draws as f64;
    let rel = (&cov - p.covariance()).norm() / p.covariance().norm();
    assert!(rel <= 0.05, "relative Frobenius error {rel}");
}

#[test]
fn sample_values_average_to_full_value() {
    let p = SparsePca::generate(8, &Spectrum::Harmonic, 4, 0.1).unwrap();
    let s = Sphere::new(8).unwrap();
    let mut rng = CounterRng::new(2);
    for _ in 0..3 {
        let x = s.random_point(&mut rng);
        let draws = 100_000;
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..draws {
            let v = p.value(x.coords(), &p.draw_payload(&mut rng));
            sum += v;
            sq += v * v;
        }
        let mean = sum / draws as f64;
        let se = ((sq / draws as f64 - mean * mean) / draws as f64).sqrt();
        let f = p.full_value(x.coords());
        assert!((mean - f).abs() <= (0.02 * f.abs()).max(4.0 * se), "{mean} vs {f}");
    }
}

#[test]
fn full_gradient_matches_finite_differences() {
    let p = SparsePca::generate(10, &Spectrum::Power(1.0), 5, 0.1).unwrap();
    let s = Sphere::new(10).unwrap();
    let mut rng = CounterRng::new(3);
    let mut checked = 0;
    while checked < 5 {
        let x = s.random_point(&mut rng);
        if x.coords().iter().any(|v| v.abs() < 1e-3) {
            continue;
        }
        let g = full_rgrad(&p, &s, &x).unwrap();
        let u = s.sample_unit_tangent(&x, &mut rng).unwrap();
        let h = 1e-6;
        let f = |t: f64| p.full_value(s.retract(&x, &u.scale(t)).unwrap().coords());
        let fd = (f(h) - f(-h)) / (2.0 * h);
        assert!((fd - g.inner(&u)).abs() <= 1e-2 * g.norm().max(1.0), "{fd} vs {}", g.inner(&u));
        checked += 1;
    }
}

#[test]
fn riemannian_gradient_of_two_by_two() {
    let a = Mat::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
    let s = Sphere::new(2).unwrap();
    for mu in [0.0, 0.3] {
        let p = SparsePca::new(a.clone(), mu).unwrap();
        let e1 = Point::sphere(&[1.0, 0.0]).unwrap();
        assert!(full_rgrad(&p, &s, &e1).unwrap().norm() < 1e-15);
        let r = 0.5f64.sqrt();
        let g = full_rgrad(&p, &s, &Point::sphere(&[r, r]).unwrap()).unwrap();
        assert!((g.coords() - Mat::from_column_slice(2, 1, &[-r, r])).norm() < 1e-14);
    }
}

#[test]
fn zeroth_order_mean_for_linear_objective() {
    let n = 10;
    let s = Sphere::new(n).unwrap();
    let mut rng = CounterRng::new(9);
    let c = Mat::from_vec(n, 1, rng.normals(n));
    let c = &c / c.norm();
    let obj = LinearObjective { c: c.clone() };
    let x = s.random_point(&mut rng);
    let cfg = ZoConfig::new(0.2, x.descriptor()).unwrap();
    let mut oracle = CountingOracle::new(&obj);
    let draws = 100_000;
    let mut mean = Mat::zeros(n, 1);
    let mut sq = 0.0;
    for _ in 0..draws {
        let g = zo_gradient(&mut oracle, &s, &x, &cfg, &mut rng).unwrap();
        sq += g.coords().norm_squared();
        mean += g.coords();
    }
    mean /= draws as f64;
    // exp_x(t u) = cos t x + sin t u, so the mean is sin(delta)/delta * P_x c.
    let target = s.project_tangent(&x, &c).unwrap().coords() * (0.2f64.sin() / 0.2);
    let se = ((sq / draws as f64 - mean.norm_squared()) / draws as f64).sqrt();
    assert!((&mean - &target).norm() <= 4.0 * se, "gap {} se {se}", (&mean - &target).norm());
    assert_eq!(oracle.stats().value_queries, 2 * draws as u64);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sample_losses_are_lipschitz(seed in any::<u64>(), n in 2usize..30, angle in 0.0f64..3.0) {
        let p = SparsePca::generate(n, &Spectrum::Harmonic, seed, 0.2).unwrap();
        let s = Sphere::new(n).unwrap();
        let mut rng = CounterRng::new(seed);
        let x = s.random_point(&mut rng);
        let y = s.exp_map(&x, &s.sample_unit_tangent(&x, &mut rng).unwrap().scale(angle)).unwrap();
        let nu: DVector<f64> = p.draw_payload(&mut rng);
        let l = p.lipschitz(&nu).unwrap();
        let gap = (p.value(x.coords(), &nu) - p.value(y.coords(), &nu)).abs();
        prop_assert!(gap <= l * s.dist(&x, &y).unwrap() * (1.0 + 1e-12) + 1e-14);
    }
}
