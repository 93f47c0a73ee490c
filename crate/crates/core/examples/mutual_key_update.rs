//! Mutual authentication followed by the broadcast key refresh. A response
//! recorded before the refresh no longer verifies.

use backscatter_auth::protocol::{
    broadcast_key_update, generate_random_number, l1_distance, mutual_authenticate, mutual_distance,
    verifier_estimate_key, AuthThreshold, Device, DeviceRegistry,
};
use backscatter_auth::scenario::{Scenario, ScenarioConfig, Station};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> backscatter_auth::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let keys = DeviceRegistry::random_population(2, 10, &mut rng)?;
    let mut alice = Device::new(Station::Alice, DeviceRegistry::new(0, keys.clone())?);
    let mut bob = Device::new(Station::Bob, DeviceRegistry::new(1, keys)?);
    let mut scenario = Scenario::new(ScenarioConfig::default(), 11)?;

    let threshold = AuthThreshold::new(1.0)?;
    let (ab, ba) = mutual_authenticate(&mut scenario, &mut alice, &mut bob, threshold, &mut rng)?;
    println!(
        "alice->bob {:.4}, bob->alice {:.4}, mutual distance {:.4}",
        ab.decision.l1_distance,
        ba.decision.l1_distance,
        mutual_distance(&ab.decision, &ba.decision)
    );
    if !(ab.decision.accepted && ba.decision.accepted) {
        println!("rejected; keys stay as they are");
        return Ok(());
    }

    println!("bob's key before: {:.3?}", bob.registry.own_key().coeffs());
    let updates = [(0, ab.session.d_true.clone()), (1, ba.session.d_true.clone())];
    broadcast_key_update(&mut [&mut alice, &mut bob], &updates)?;
    println!("bob's key after:  {:.3?}", bob.registry.own_key().coeffs());

    let d_next = generate_random_number(10, &mut rng);
    let stale = verifier_estimate_key(&ab.session.p3, &ab.session.p4, &d_next)?;
    println!(
        "old response against the new key: distance {:.4}",
        l1_distance(&stale, alice.registry.key(1)?.coeffs())?
    );
    Ok(())
}
