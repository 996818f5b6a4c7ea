use phieq::efp::{efp_eah, efp_error, efp_iterative};
use phieq::geometry::ConvexBody;

fn main() -> phieq::Result<()> {
    // A rotation by a quarter turn maps the square onto itself and fixes
    // only the centre; the ellipsoid method returns a distribution whose
    // mean is a fixed point.
    let body = ConvexBody::cube(2, 1.0);
    let rotate = |x: &[f64]| Ok(vec![-x[1], x[0]]);

    let sol = efp_eah(&body, rotate, 1e-8)?;
    println!(
        "ellipsoid: {} atoms, error {:.2e}, {} cuts",
        sol.distribution.len(),
        sol.error,
        sol.cuts
    );
    for (x, w) in sol.distribution.atoms() {
        println!("  {w:.4} at {x:?}");
    }

    let mu = efp_iterative(&body, rotate, 1e-2, &[1.0, 1.0])?;
    println!("iterates: {} atoms, error {:.2e}", mu.len(), efp_error(&mu, rotate)?);
    Ok(())
}
