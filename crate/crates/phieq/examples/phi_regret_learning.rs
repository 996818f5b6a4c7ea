use phieq::deviations::Features;
use phieq::geometry::ConvexBody;
use phieq::learning::{phi_regret_minimizer, play, LearnerSettings, RandomAdversary};

fn main() -> phieq::Result<()> {
    let body = ConvexBody::box_body(vec![0.0, 0.0], vec![1.0, 1.0])?;
    for horizon in [250, 1000] {
        let mut learner = phi_regret_minimizer(&body, Features::Legendre { degree: 2 }, LearnerSettings::new(horizon))?;
        play(&mut learner, &mut RandomAdversary::new(2, 7), horizon)?;
        let comparators = learner.space().relaxation(9)?;
        let ledger = learner.ledger();
        let regret = ledger.phi_regret(&comparators)?;
        println!(
            "T = {horizon}: average regret {:.4}, shell cuts {}, drift {:.1e}",
            regret / horizon as f64,
            learner.shell().cuts().len(),
            ledger.drift()
        );
    }
    Ok(())
}
