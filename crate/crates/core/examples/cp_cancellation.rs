//! The receiver subtracts each OFDM symbol's prefix from its tail copy. The
//! ambient downlink cancels exactly while the midpoint-hop reflection
//! survives.

use backscatter_auth::channel::{FadingProcess, LinkGeometry, ProfileKind};
use backscatter_auth::phy::{
    apply_multipath, cp_subtract, gen_ofdm_frame, mean_power, transmit_samples, FieldChannels, OfdmConfig,
    ReceiverParams,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> backscatter_auth::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let profile = ProfileKind::Urban.profile();
    let config = OfdmConfig {
        cp_guard: profile.cascade_spread(),
        ..OfdmConfig::default()
    };
    let link = |seed| FadingProcess::new(LinkGeometry::new(3.0).unwrap(), profile.clone(), seed);

    let frame = gen_ofdm_frame(&config, 4, &mut rng)?;
    let downlink = apply_multipath(&frame.samples, &link(1)?.taps(), &config)?;
    let residual = cp_subtract(&downlink, &config)?;
    println!(
        "downlink only: received power {:.3e} W, after subtraction {:.3e} W",
        mean_power(&downlink),
        mean_power(&residual)
    );

    let channels = FieldChannels::fixed(&link(2)?.taps(), &link(3)?.taps(), &link(1)?.taps(), 4);
    let params = ReceiverParams::default();
    let received = transmit_samples(&[1.0, 0.25, 0.5, 0.1], &frame, &channels, &params, &mut rng)?;
    let z = cp_subtract(&received, &config)?;
    for (k, window) in z.chunks(config.window_len()).enumerate() {
        println!("symbol {k}: reflected power in window {:.3e} W", mean_power(window));
    }
    Ok(())
}
