use phieq::deviations::Features;
use phieq::games::{compute_phi_equilibrium, zero_sum_value, MultilinearGame, NormalFormGame};

fn main() -> phieq::Result<()> {
    for (name, nf) in [
        ("matching pennies", NormalFormGame::matching_pennies()),
        ("rock-paper-scissors", NormalFormGame::rock_paper_scissors()),
    ] {
        let value = zero_sum_value(&nf.matrix(0)?)?;
        let game = MultilinearGame::normal_form(nf)?;
        let run = compute_phi_equilibrium(&game, &[Features::Linear, Features::Linear], 1e-4)?;
        let r = &run.report;
        println!(
            "{name}: swap gaps {:?}, payoffs {:?}, game value {value:.3}, {} atoms, {} cuts",
            r.gaps, r.values, r.support, r.cuts
        );
    }
    Ok(())
}
