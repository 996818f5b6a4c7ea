use phieq::ellipsoid::{log_volume_ratio, EllipsoidState};

fn main() -> phieq::Result<()> {
    let k = 3;
    let mut e = EllipsoidState::init_ball(k, 2.0)?;
    let start = e.log_volume()?;
    for step in 0..6 {
        let mut w = vec![0.0; k];
        w[step % k] = if step % 2 == 0 { 1.0 } else { -1.0 };
        e = e.central_cut(&w)?;
        println!(
            "cut {step}: centre {:?}, log-volume drop {:.4}",
            e.center(),
            start - e.log_volume()?
        );
    }
    println!("guaranteed drop per cut {:.4}", -log_volume_ratio(k));
    Ok(())
}
