//! Alice challenges Bob once in a clean channel and once at 15 dB, and
//! prints the session transcript.

use backscatter_auth::channel::ProfileKind;
use backscatter_auth::protocol::{one_way_authenticate, AuthThreshold, Device, DeviceRegistry};
use backscatter_auth::scenario::{PowerMode, Scenario, ScenarioConfig, Station};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> backscatter_auth::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let keys = DeviceRegistry::random_population(2, 10, &mut rng)?;
    let alice = Device::new(Station::Alice, DeviceRegistry::new(0, keys.clone())?);
    let mut bob = Device::new(Station::Bob, DeviceRegistry::new(1, keys)?);
    let threshold = AuthThreshold::new(1.0)?;

    for power in [PowerMode::Noiseless, PowerMode::MeasuredSnr { snr_db: 15.0 }] {
        let cfg = ScenarioConfig {
            power,
            profile: ProfileKind::Rural,
            ..ScenarioConfig::default()
        };
        let mut scenario = Scenario::new(cfg, 99)?;
        let out = one_way_authenticate(&mut scenario, &alice, &mut bob, threshold, &mut rng)?;
        println!("{power:?}");
        for line in out.session.transcript(None) {
            println!("  {line}");
        }
    }
    Ok(())
}
