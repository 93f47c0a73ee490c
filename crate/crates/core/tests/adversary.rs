use backscatter_auth::adversary::{
    naive_eavesdrop, smart_eavesdrop, AttackKind, Counterfeiter, Impersonator, SmartKnowledge,
};
use backscatter_auth::harness::experiment::eavesdrop_trial;
use backscatter_auth::harness::ExperimentConfig;
use backscatter_auth::protocol::{l1_distance, one_way_authenticate, AuthThreshold, Device, DeviceRegistry};
use backscatter_auth::scenario::{EveConfig, PowerMode, Scenario, ScenarioConfig, Station};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pair(len: usize, rng: &mut ChaCha8Rng) -> (Device, Device) {
    let keys = DeviceRegistry::random_population(2, len, rng).unwrap();
    (
        Device::new(Station::Alice, DeviceRegistry::new(0, keys.clone()).unwrap()),
        Device::new(Station::Bob, DeviceRegistry::new(1, keys).unwrap()),
    )
}

fn permissive() -> AuthThreshold {
    AuthThreshold::new(f64::MAX).unwrap()
}

fn noiseless_with_eve(victim: Station, distance_m: f64) -> ScenarioConfig {
    ScenarioConfig {
        power: PowerMode::Noiseless,
        eve: Some(EveConfig { victim, distance_m }),
        ..ScenarioConfig::default()
    }
}

/// What the verifier computes from a counterfeit response in a clean
/// channel, written out step by step.
fn counterfeit_oracle(d: &[f64], k_i: &[f64], c_i: &[f64], c_j: &[f64]) -> Vec<f64> {
    (0..d.len())
        .map(|l| {
            let forged = (d[l] / k_i[l] * c_i[l]).clamp(0.0, 1.0);
            (d[l] * c_j[l] / forged).clamp(0.0, 1.0)
        })
        .collect()
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

#[test]
fn distant_listener_learns_only_the_ratio() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (alice, mut bob) = pair(10, &mut rng);
    let mut sc = Scenario::new(noiseless_with_eve(Station::Alice, 1.0), 3).unwrap();
    let out = one_way_authenticate(&mut sc, &alice, &mut bob, permissive(), &mut rng).unwrap();
    let obs = naive_eavesdrop(&sc.eve_log()[0]).unwrap();
    assert!(obs.inferred_key.is_none() && obs.channel_estimate.is_none());
    let k = alice.registry.own_key().coeffs();
    let s = &out.session;
    for (l, ratio) in obs.ratio.iter().enumerate() {
        assert!((ratio / (s.d_true[l] / k[l]) - 1.0).abs() < 1e-9);
        assert!((ratio / (s.p1[l] / s.p2[l]) - 1.0).abs() < 1e-9);
    }
}

#[test]
fn adjacent_listener_recovers_both_fields_in_a_clean_channel() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (alice, mut bob) = pair(10, &mut rng);
    // within 10 cm the coupling gain saturates at one
    let mut sc = Scenario::new(noiseless_with_eve(Station::Alice, 0.05), 4).unwrap();
    let out = one_way_authenticate(&mut sc, &alice, &mut bob, permissive(), &mut rng).unwrap();
    let knowledge = SmartKnowledge::new(sc.ofdm(), sc.config().efficiency, 0.0);
    let obs = smart_eavesdrop(&sc.eve_log()[0], &knowledge).unwrap();
    let key = obs.inferred_key.unwrap();
    let random = obs.inferred_random.unwrap();
    for l in 0..10 {
        assert!((key[l] - alice.registry.own_key().coeffs()[l]).abs() < 1e-9);
        assert!((random[l] - out.session.d_true[l]).abs() < 1e-9);
    }
}

#[test]
fn blind_guesses_are_uncorrelated_with_the_key() {
    let cfg = ExperimentConfig {
        attack: AttackKind::EavesdropNaive,
        ..Default::default()
    };
    let (mut truth, mut guess) = (Vec::new(), Vec::new());
    for t in 0..1000 {
        let (k, g) = eavesdrop_trial(&cfg, t).unwrap();
        truth.extend(k);
        guess.extend(g);
    }
    let r = pearson(&truth, &guess);
    assert!(r.abs() < 2.576 / (truth.len() as f64).sqrt(), "r = {r}");
}

#[test]
fn wrong_guesses_are_rejected_in_a_clean_channel() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (alice, _) = pair(10, &mut rng);
    let mut sc = Scenario::new(noiseless_with_eve(Station::Bob, 1.0), 6).unwrap();
    let mut eve = Impersonator { victim_id: 1 };
    let out = one_way_authenticate(&mut sc, &alice, &mut eve, AuthThreshold::new(0.05).unwrap(), &mut rng).unwrap();
    assert!(!out.decision.accepted);
}

#[test]
fn perfect_counterfeit_guesses_pass() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (alice, bob) = pair(10, &mut rng);
    let mut sc = Scenario::new(noiseless_with_eve(Station::Bob, 1.0), 8).unwrap();
    let mut eve = Counterfeiter {
        victim_id: 1,
        guess_i: alice.registry.own_key().coeffs().to_vec(),
        guess_j: bob.registry.own_key().coeffs().to_vec(),
    };
    let out = one_way_authenticate(&mut sc, &alice, &mut eve, AuthThreshold::new(1e-6).unwrap(), &mut rng).unwrap();
    assert!(out.decision.accepted, "distance {}", out.decision.l1_distance);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn counterfeit_distance_matches_the_chain_algebra(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (alice, bob) = pair(10, &mut rng);
        let mut sc = Scenario::new(noiseless_with_eve(Station::Bob, 1.0), rng.random()).unwrap();
        let mut eve = Counterfeiter::random(1, 10, &mut rng);
        let (c_i, c_j) = (eve.guess_i.clone(), eve.guess_j.clone());
        let out = one_way_authenticate(&mut sc, &alice, &mut eve, permissive(), &mut rng).unwrap();
        let expected = counterfeit_oracle(&out.session.d_true, alice.registry.own_key().coeffs(), &c_i, &c_j);
        let oracle_distance = l1_distance(&expected, bob.registry.own_key().coeffs()).unwrap();
        prop_assert!((out.decision.l1_distance - oracle_distance).abs() < 1e-9);
    }
}
