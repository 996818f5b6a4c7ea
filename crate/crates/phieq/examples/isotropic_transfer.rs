use phieq::deviations::Features;
use phieq::geometry::{isotropic_transfer, AffineMap, ConvexBody, RegretMinimizer};
use phieq::learning::{phi_regret_minimizer, play, LearnerSettings, SinusoidalAdversary};
use phieq::numerics::DenseMatrix;

fn main() -> phieq::Result<()> {
    // A thin box [0, 4] x [0, 0.5] is stretched onto [-1, 1]^2 before
    // learning; strategies come back through the inverse map.
    let body = ConvexBody::box_body(vec![0.0, 0.0], vec![4.0, 0.5])?;
    let psi = AffineMap::new(DenseMatrix::diagonal(&[0.5, 4.0]), vec![-1.0, -1.0])?;
    let horizon = 300;
    let inner = phi_regret_minimizer(
        &ConvexBody::cube(2, 1.0),
        Features::Linear,
        LearnerSettings::new(horizon),
    )?;
    let mut learner = isotropic_transfer(psi, inner, 1.0, 2)?;
    play(&mut learner, &mut SinusoidalAdversary { d: 2, period: 50.0 }, horizon)?;
    let last = learner.next_strategy()?;
    println!("utility scale factor {:.3}", learner.scale());
    println!(
        "last strategy mean {:?}, inside body: {}",
        last.mean(),
        body.membership(&last.mean(), 1e-9)?
    );
    Ok(())
}
