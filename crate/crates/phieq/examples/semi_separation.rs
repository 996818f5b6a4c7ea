use phieq::efp::{semi_separate, SemiSepResult};
use phieq::geometry::ConvexBody;

fn report(name: &str, r: SemiSepResult) {
    match r {
        SemiSepResult::Efp(sol) => println!("{name}: fixed point with error {:.2e}", sol.error),
        SemiSepResult::Witness { x, image } => println!("{name}: {x:?} is sent outside, to {image:?}"),
    }
}

fn main() -> phieq::Result<()> {
    let body = ConvexBody::simplex(3)?;
    let cycle = |x: &[f64]| Ok(vec![x[2], x[0], x[1]]);
    report("cyclic shift", semi_separate(&body, cycle, 1e-6)?);

    let stretch = |x: &[f64]| Ok(vec![2.0 * x[0] - x[1], x[1], x[2]]);
    report("stretch", semi_separate(&body, stretch, 1e-6)?);
    Ok(())
}
