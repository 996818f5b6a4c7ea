use phieq::geometry::ConvexBody;
use phieq::learning::{gordon_efp_wrapper, play, ColumnStochasticGd, Comparators, RandomAdversary};

fn main() -> phieq::Result<()> {
    // Swap regret on the 3-simplex: an external learner over column-stochastic
    // matrices, each proposal played through its expected fixed point.
    let n = 3;
    let horizon = 400;
    let eta = 1.0 / (horizon as f64).sqrt();
    let mut learner = gordon_efp_wrapper(ConvexBody::simplex(n)?, ColumnStochasticGd::new(n, eta)?, 1e-6)?;
    play(&mut learner, &mut RandomAdversary::new(n, 11), horizon)?;
    let swap = learner.ledger().phi_regret(&Comparators::ColumnStochastic { n })?;
    println!(
        "average swap regret after {horizon} rounds: {:.4}",
        swap / horizon as f64
    );
    println!("final deviation matrix {:?}", learner.external().matrix().to_rows());
    Ok(())
}
