use phieq::deviations::Features;
use phieq::games::compute_phi_equilibrium;
use phieq::games::MultilinearGame;
use phieq::geometry::ConvexBody;
use phieq::numerics::DenseMatrix;

fn main() -> phieq::Result<()> {
    // Two players on [-1, 1] with u_1 = x_1 x_2 / 2 and u_2 = -u_1, checked
    // against quadratic deviations of each player's own action.
    let a = DenseMatrix::from_rows(&[vec![0.5]])?;
    let game = MultilinearGame::bilinear(
        ConvexBody::cube(1, 1.0),
        ConvexBody::cube(1, 1.0),
        a.clone(),
        a.scaled(-1.0),
    )?;
    let features = [Features::Legendre { degree: 2 }; 2];
    let run = compute_phi_equilibrium(&game, &features, 1e-3)?;
    let r = &run.report;
    println!("gaps {:?} ({:?}), payoffs {:?}", r.gaps, r.method, r.values);
    println!(
        "{} cuts ({} good-enough, {} separating)",
        r.cuts, r.ger_cuts, r.sep_cuts
    );
    for t in 0..run.joint.len() {
        println!("  {:.4} at {:?}", run.joint.weight(t), run.joint.blocks(t));
    }
    Ok(())
}
