//! Sphere and Stiefel primitives: retraction, exp/log, transport, projection.

use rionc::{Manifold, Mat, Point, Sphere, Stiefel};

fn main() -> rionc::Result<()> {
    let s2 = Sphere::new(3)?;
    let e1 = Point::sphere(&[1.0, 0.0, 0.0])?;
    let e2 = Point::sphere(&[0.0, 1.0, 0.0])?;

    let v = s2.project_tangent(&e1, &Mat::from_column_slice(3, 1, &[0.0, 1.0, 0.0]))?;
    let r = s2.retract(&e1, &v)?;
    println!("retract(e1, e2)        = {:?}", r.coords().as_slice());

    let quarter = v.scale(std::f64::consts::FRAC_PI_2);
    println!("exp(e1, pi/2 e2)       = {:?}", s2.exp_map(&e1, &quarter)?.coords().as_slice());
    println!("log(e1, e2)            = {:?}", s2.log_map(&e1, &e2)?.coords().as_slice());
    println!("dist(e1, e2)           = {}", s2.dist(&e1, &e2)?);

    // The geodesic's own velocity turns into -e1 at e2.
    let moved = s2.parallel_transport(&e1, &e2, &quarter)?;
    println!("transport velocity     = {:?}", moved.coords().as_slice());

    let antipode = Point::sphere(&[-1.0, 0.0, 0.0])?;
    match s2.log_map(&e1, &antipode) {
        Err(e) => println!("log at the antipode    : {e}"),
        Ok(_) => unreachable!(),
    }

    let st = Stiefel::new(5, 2)?;
    let mut rng = rionc::CounterRng::new(1);
    let x = st.random_point(&mut rng);
    let xi = st.sample_unit_tangent(&x, &mut rng)?.scale(0.7);
    let y = st.retract(&x, &xi)?;
    println!("Stiefel(5,2): |Y^T Y - I| = {:.2e} after a polar retraction", y.feasibility_error());
    match st.exp_map(&x, &xi) {
        Err(e) => println!("Stiefel exp_map        : {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
