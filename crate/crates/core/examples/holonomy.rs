//! Transport around closed loops and along broken geodesics on S^2.

use rionc::check::broken_geodesic;
use rionc::metrics::{chain_transport, holonomy_defect, TransportChain};
use rionc::{CounterRng, Manifold, Mat, Point, Sphere};

fn main() -> rionc::Result<()> {
    let s2 = Sphere::new(3)?;
    let e = |i: usize| {
        let mut c = [0.0; 3];
        c[i] = 1.0;
        Point::sphere(&c)
    };
    let octant = TransportChain::new(vec![e(0)?, e(1)?, e(2)?, e(0)?])?;
    let v = s2.project_tangent(&e(0)?, &Mat::from_column_slice(3, 1, &[0.0, 1.0, 0.0]))?;
    let back = chain_transport(&s2, &octant, &v)?;
    println!("octant loop: e2 comes back as {:?}", back.coords().as_slice());
    println!(
        "defect {:.12} (sqrt 2 = {:.12}), loop length {:.4}",
        holonomy_defect(&s2, &octant, &v)?,
        2f64.sqrt(),
        octant.length(&s2)?
    );

    let mut rng = CounterRng::new(11);
    let x = s2.random_point(&mut rng);
    println!("broken geodesics from a random point, |Gamma v - P v| against |v| L:");
    for segments in 2..=5 {
        let lengths = vec![std::f64::consts::FRAC_PI_2 / segments as f64; segments];
        let pts = broken_geodesic(&s2, &x, &lengths, &mut rng)?;
        let chain = TransportChain::new(pts)?;
        let v = s2.sample_unit_tangent(&x, &mut rng)?;
        let moved = chain_transport(&s2, &chain, &v)?;
        let projected = s2.project_tangent(chain.end(), v.coords())?;
        println!(
            "  {segments} segments: {:.4} <= {:.4}",
            (moved.coords() - projected.coords()).norm(),
            chain.length(&s2)?
        );
    }
    Ok(())
}
