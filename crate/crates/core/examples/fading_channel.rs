//! Large-scale gain, coherence time and a Jakes-correlated tap trajectory.

use backscatter_auth::channel::{coherence_time_s, path_loss_gain, FadingProcess, LinkGeometry, ProfileKind};

fn main() -> backscatter_auth::Result<()> {
    for d in [1.0, 3.0, 10.0] {
        let g = path_loss_gain(&LinkGeometry::new(d)?)?;
        println!("d = {d:>4} m  |h| = {g:.3e}  power gain = {:.1} dB", 20.0 * g.log10());
    }

    let moving = LinkGeometry::new(3.0)?.with_speed(30.0)?;
    println!(
        "30 m/s: Doppler {:.1} Hz, coherence time {:.2} ms",
        moving.doppler_hz(),
        coherence_time_s(&moving) * 1e3
    );

    let mut fading = FadingProcess::new(moving, ProfileKind::Urban.profile(), 42)?;
    println!("mean power {:.3e}", fading.mean_power());
    for step in 0..8 {
        println!("t = {:>4.1} ms  instantaneous power {:.3e}", step as f64, fading.instantaneous_power());
        fading.evolve(1e-3);
    }
    Ok(())
}
