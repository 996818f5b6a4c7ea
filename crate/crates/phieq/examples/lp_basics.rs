use phieq::numerics::{lp_solve, LpOutcome, LpProblem, Relation, Sense};

fn main() -> phieq::Result<()> {
    // max 3x + 2y  s.t.  x + y <= 4,  x + 3y <= 6,  x <= 3
    let mut lp = LpProblem::new(Sense::Maximize, vec![3.0, 2.0]);
    lp.add(vec![1.0, 1.0], Relation::Le, 4.0)
        .add(vec![1.0, 3.0], Relation::Le, 6.0)
        .upper_bound(0, 3.0);
    match lp_solve(&lp, 1e-9)? {
        LpOutcome::Optimal { x, value } => println!("optimum {value} at {x:?}"),
        other => println!("unexpected outcome {other:?}"),
    }

    let mut infeasible = LpProblem::new(Sense::Minimize, vec![1.0]);
    infeasible
        .add(vec![1.0], Relation::Ge, 2.0)
        .add(vec![1.0], Relation::Le, 1.0);
    if let LpOutcome::Infeasible { farkas } = lp_solve(&infeasible, 1e-9)? {
        println!("infeasible, Farkas multipliers {farkas:?}");
    }
    Ok(())
}
