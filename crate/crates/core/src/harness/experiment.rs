//! Monte Carlo trial runners. Every trial owns a seed derived from the
//! master seed, so results do not depend on thread scheduling.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::adversary::{
    blind_guess, counterfeit_attack, impersonation_attempt, leaked_information, replay_attack,
    smart_eavesdrop, AttackKind, Counterfeiter, ReplayRecording, SmartKnowledge,
};
use crate::baselines::{latency, power, Scheme};
use crate::error::{Error, Result};
use crate::harness::config::{AuthMode, ExperimentConfig};
use crate::harness::metrics::{acceptance_rate, calibrate_delta, compute_roc, RocCurve};
use crate::phy::write_iq_f32le;
use crate::protocol::{
    broadcast_key_update, generate_random_number, identify_device, mutual_authenticate,
    mutual_distance, one_way_authenticate, AuthThreshold, Device, DeviceId, DeviceRegistry, PidKey,
};
use crate::scenario::{Scenario, Station};

const ALICE: DeviceId = 0;
const BOB: DeviceId = 1;

/// Child seed for one trial: a digest of the master seed and the trial's
/// coordinates.
pub fn derive_seed(master: u64, axis: &str, value: &str, trial: u64, tag: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    for part in [axis, value, tag] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    h.update(trial.to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

/// Where a trial sits in the sweep; feeds [`derive_seed`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialContext {
    pub master_seed: u64,
    pub axis: String,
    pub value: String,
}

impl TrialContext {
    pub fn new(cfg: &ExperimentConfig, value: &str) -> Self {
        TrialContext {
            master_seed: cfg.seed,
            axis: cfg.sweep.name().to_string(),
            value: value.to_string(),
        }
    }

    pub fn seed(&self, trial: u64, tag: &str) -> u64 {
        derive_seed(self.master_seed, &self.axis, &self.value, trial, tag)
    }
}

fn permissive() -> AuthThreshold {
    AuthThreshold::new(f64::MAX).expect("finite threshold")
}

/// Alice (id 0) and Bob (id 1), each knowing both keys.
fn device_pair(len: usize, rng: &mut ChaCha8Rng) -> Result<(Device, Device)> {
    let keys: BTreeMap<DeviceId, PidKey> = [(ALICE, PidKey::random(len, rng)?), (BOB, PidKey::random(len, rng)?)]
        .into_iter()
        .collect();
    Ok((
        Device::new(Station::Alice, DeviceRegistry::new(ALICE, keys.clone())?),
        Device::new(Station::Bob, DeviceRegistry::new(BOB, keys)?),
    ))
}

fn setup(cfg: &ExperimentConfig, seed: u64, victim: Option<Station>) -> Result<(Scenario, Device, Device, ChaCha8Rng)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (alice, bob) = device_pair(cfg.keylength, &mut rng)?;
    let scenario = Scenario::new(cfg.scenario(victim)?, rng.next_u64())?;
    Ok((scenario, alice, bob, rng))
}

/// L1 distance of one legitimate exchange: the one-way distance, or the
/// larger of the two directions in mutual mode.
pub fn genuine_trial(cfg: &ExperimentConfig, seed: u64) -> Result<f64> {
    let (mut sc, mut alice, mut bob, mut rng) = setup(cfg, seed, None)?;
    match cfg.auth {
        AuthMode::OneWay => Ok(one_way_authenticate(&mut sc, &alice, &mut bob, permissive(), &mut rng)?
            .decision
            .l1_distance),
        AuthMode::Mutual => {
            let (ab, ba) = mutual_authenticate(&mut sc, &mut alice, &mut bob, permissive(), &mut rng)?;
            Ok(mutual_distance(&ab.decision, &ba.decision))
        }
    }
}

/// Number of sessions an attacker must win: one, or two in mutual mode.
fn rounds(cfg: &ExperimentConfig) -> usize {
    match cfg.auth {
        AuthMode::OneWay => 1,
        AuthMode::Mutual => 2,
    }
}

/// L1 distance achieved by the configured active attacker against Alice
/// while claiming to be Bob. Passive attack kinds are scored as
/// impersonation, which is all a listener can attempt without a key.
pub fn attack_trial(cfg: &ExperimentConfig, seed: u64) -> Result<f64> {
    match cfg.attack {
        AttackKind::Replay => replay_trial(cfg, seed),
        AttackKind::Counterfeit => {
            let (mut sc, alice, _, mut rng) = setup(cfg, seed, Some(Station::Bob))?;
            let mut worst: f64 = 0.0;
            for _ in 0..rounds(cfg) {
                let mut attacker = Counterfeiter::random(BOB, cfg.keylength, &mut rng);
                let d = counterfeit_attack(&mut sc, &alice, &mut attacker, permissive(), &mut rng)?;
                worst = worst.max(d.l1_distance);
                sc.advance_response_delay(cfg.keylength);
            }
            Ok(worst)
        }
        _ => {
            let (mut sc, alice, _, mut rng) = setup(cfg, seed, Some(Station::Bob))?;
            let mut worst: f64 = 0.0;
            for _ in 0..rounds(cfg) {
                let d = impersonation_attempt(&mut sc, &alice, BOB, permissive(), &mut rng)?;
                worst = worst.max(d.l1_distance);
                sc.advance_response_delay(cfg.keylength);
            }
            Ok(worst)
        }
    }
}

/// Eve records Bob's response during a mutual exchange, the devices update
/// their keys if the exchange succeeded (when `key_update` is on), and Eve
/// later replays the recording to Alice's fresh challenges.
pub fn replay_trial(cfg: &ExperimentConfig, seed: u64) -> Result<f64> {
    let (mut sc, mut alice, mut bob, mut rng) = setup(cfg, seed, Some(Station::Bob))?;
    let gate = match cfg.delta {
        Some(d) => AuthThreshold::new(d)?,
        None => permissive(),
    };
    let (ab, ba) = mutual_authenticate(&mut sc, &mut alice, &mut bob, gate, &mut rng)?;
    let recording = match &ab.response {
        Some(capture) => ReplayRecording::from_capture(BOB, capture)?,
        None => return Ok(f64::INFINITY),
    };
    if cfg.key_update && ab.decision.accepted && ba.decision.accepted {
        let updates = [
            (ALICE, ab.session.d_true.clone()),
            (BOB, ba.session.d_true.clone()),
        ];
        broadcast_key_update(&mut [&mut alice, &mut bob], &updates)?;
    }
    sc.advance_response_delay(cfg.keylength);

    let mut worst: f64 = 0.0;
    for _ in 0..rounds(cfg) {
        let d = if cfg.reuse_random {
            ab.session.d_true.clone()
        } else {
            generate_random_number(cfg.keylength, sc.rng())
        };
        let outcome = replay_attack(&mut sc, &alice, &recording, d, permissive(), &mut rng)?;
        worst = worst.max(outcome.decision.l1_distance);
        sc.advance_response_delay(cfg.keylength);
    }
    Ok(worst)
}

/// Alice's key and the eavesdropper's reconstruction of it from one
/// overheard challenge.
pub fn eavesdrop_trial(cfg: &ExperimentConfig, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    let (mut sc, alice, mut bob, mut rng) = setup(cfg, seed, Some(Station::Alice))?;
    one_way_authenticate(&mut sc, &alice, &mut bob, permissive(), &mut rng)?;
    let truth = alice.registry.own_key().coeffs().to_vec();
    let capture = sc
        .eve_log()
        .first()
        .ok_or_else(|| Error::Protocol("eavesdropper heard nothing".into()))?;
    let inferred = match cfg.attack {
        AttackKind::EavesdropSmart => {
            let sigma2 = capture
                .fields(Station::Eve)
                .map(|f| f[0].noise_variance_w)
                .unwrap_or(0.0);
            let knowledge = SmartKnowledge::new(sc.ofdm(), cfg.efficiency, sigma2);
            match smart_eavesdrop(capture, &knowledge) {
                Ok(obs) => obs.inferred_key.unwrap_or_else(|| vec![0.0; truth.len()]),
                Err(Error::DegenerateMeasurement(_)) => vec![0.0; truth.len()],
                Err(e) => return Err(e),
            }
        }
        _ => blind_guess(truth.len(), &mut rng),
    };
    Ok((truth, inferred))
}

/// Normalized leaked information over `n_auth` overheard challenges.
pub fn leaked_information_trials(cfg: &ExperimentConfig, ctx: &TrialContext) -> Result<f64> {
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..cfg.n_auth as u64)
        .into_par_iter()
        .map(|t| eavesdrop_trial(cfg, ctx.seed(t, "eavesdrop")))
        .collect::<Result<_>>()?;
    let (truth, inferred): (Vec<f64>, Vec<f64>) = pairs
        .into_iter()
        .flat_map(|(t, i)| t.into_iter().zip(i))
        .unzip();
    leaked_information(&truth, &inferred, cfg.li_bins)
}

pub fn genuine_scores(cfg: &ExperimentConfig, ctx: &TrialContext, tag: &str) -> Result<Vec<f64>> {
    (0..cfg.n_auth as u64)
        .into_par_iter()
        .map(|t| genuine_trial(cfg, ctx.seed(t, tag)))
        .collect()
}

pub fn attack_scores(cfg: &ExperimentConfig, ctx: &TrialContext, tag: &str) -> Result<Vec<f64>> {
    (0..cfg.n_auth as u64)
        .into_par_iter()
        .map(|t| attack_trial(cfg, ctx.seed(t, tag)))
        .collect()
}

/// Identification results: `counts[i][j]` is how often device `i + 1` was
/// identified as device `j + 1`; `unresolved[i]` counts aborted sessions.
/// Each row plus its unresolved count sums to the trials per device.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
    pub unresolved: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn accuracy(&self) -> f64 {
        let total: u64 = self.counts.iter().flatten().sum::<u64>() + self.unresolved.iter().sum::<u64>();
        let hits: u64 = (0..self.counts.len()).map(|i| self.counts[i][i]).sum();
        hits as f64 / total as f64
    }
}

/// The verifier (id 0) holds keys of devices `1..=n_devices`; each device
/// in turn proves itself and the verifier names the closest stored key.
pub fn identification_trial(cfg: &ExperimentConfig, prover: DeviceId, seed: u64) -> Result<Option<DeviceId>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keys = DeviceRegistry::random_population(cfg.n_devices + 1, cfg.keylength, &mut rng)?;
    let verifier = Device::new(Station::Alice, DeviceRegistry::new(0, keys.clone())?);
    let prover_keys: BTreeMap<DeviceId, PidKey> = [(0, keys[&0].clone()), (prover, keys[&prover].clone())]
        .into_iter()
        .collect();
    let mut prover_dev = Device::new(Station::Bob, DeviceRegistry::new(prover, prover_keys)?);
    let mut sc = Scenario::new(cfg.scenario(None)?, rng.next_u64())?;
    let outcome = one_way_authenticate(&mut sc, &verifier, &mut prover_dev, permissive(), &mut rng)?;
    match outcome.session.k_estimated {
        Some(k) => Ok(Some(identify_device(&k, &verifier.registry)?)),
        None => Ok(None),
    }
}

pub fn identification(cfg: &ExperimentConfig, ctx: &TrialContext) -> Result<ConfusionMatrix> {
    let n = cfg.n_devices;
    let jobs: Vec<(usize, u64)> = (0..n).flat_map(|i| (0..cfg.n_auth as u64).map(move |t| (i, t))).collect();
    let results: Vec<(usize, Option<DeviceId>)> = jobs
        .into_par_iter()
        .map(|(i, t)| {
            let prover = (i + 1) as DeviceId;
            let tag = format!("identify/{prover}");
            Ok((i, identification_trial(cfg, prover, ctx.seed(t, &tag))?))
        })
        .collect::<Result<_>>()?;
    let mut m = ConfusionMatrix {
        counts: vec![vec![0; n]; n],
        unresolved: vec![0; n],
    };
    for (i, pred) in results {
        match pred {
            Some(p) => m.counts[i][p as usize - 1] += 1,
            None => m.unresolved[i] += 1,
        }
    }
    Ok(m)
}

/// Everything measured at one sweep point.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub sweep_axis: String,
    pub sweep_value: String,
    pub auth: String,
    pub attack: String,
    pub n_auth: usize,
    pub auc: f64,
    pub delta: f64,
    pub tpr_at_delta: f64,
    pub fpr_at_delta: f64,
    /// `(fpr limit, best tpr)` per configured limit.
    pub tpr_at_fpr: Vec<(f64, f64)>,
    pub li: Option<f64>,
    pub latency_s: f64,
    pub power_mw: f64,
    pub seed: u64,
    pub config_hash: String,
    pub roc: RocCurve,
    pub confusion: Option<ConfusionMatrix>,
    pub genuine: Vec<f64>,
    pub attacker: Vec<f64>,
}

/// Runs every trial of one point. The threshold is `cfg.delta`, or the one
/// meeting `target_fpr` on these same populations.
pub fn run_point(cfg: &ExperimentConfig, label: &str) -> Result<MetricsReport> {
    let ctx = TrialContext::new(cfg, label);
    let genuine = genuine_scores(cfg, &ctx, "genuine")?;
    let attacker = attack_scores(cfg, &ctx, "attack")?;
    let roc = compute_roc(&genuine, &attacker)?;
    let delta = match cfg.delta {
        Some(d) => d,
        None => calibrate_delta(&genuine, &attacker, cfg.target_fpr)?,
    };
    let li = if cfg.attack.is_passive() {
        Some(leaked_information_trials(cfg, &ctx)?)
    } else {
        None
    };
    let confusion = if cfg.identification {
        Some(identification(cfg, &ctx)?)
    } else {
        None
    };
    let cost = cfg.cost_model();
    Ok(MetricsReport {
        sweep_axis: cfg.sweep.name().into(),
        sweep_value: label.into(),
        auth: cfg.auth.name().into(),
        attack: cfg.attack.name().into(),
        n_auth: cfg.n_auth,
        auc: roc.auc,
        delta,
        tpr_at_delta: acceptance_rate(&genuine, delta),
        fpr_at_delta: acceptance_rate(&attacker, delta),
        tpr_at_fpr: cfg.fpr_limits.iter().map(|l| (*l, roc.tpr_at_fpr(*l))).collect(),
        li,
        latency_s: latency(Scheme::Ours, &cost, cfg.n_auth),
        power_mw: power(Scheme::Ours, &cost, cfg.d_ij_m)?,
        seed: cfg.seed,
        config_hash: cfg.config_hash(),
        roc,
        confusion,
        genuine,
        attacker,
    })
}

/// Validates the config and runs every sweep point in order.
pub fn run_monte_carlo(cfg: &ExperimentConfig) -> Result<Vec<MetricsReport>> {
    cfg.validate()?;
    cfg.points()?
        .iter()
        .map(|(label, point)| run_point(point, label))
        .collect()
}

/// Threshold calibrated on a dedicated seed stream, with the rates it
/// achieves there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Calibration {
    pub delta: f64,
    pub tpr: f64,
    pub fpr: f64,
}

pub fn calibrate(cfg: &ExperimentConfig, label: &str) -> Result<Calibration> {
    let ctx = TrialContext::new(cfg, label);
    let genuine = genuine_scores(cfg, &ctx, "calibrate/genuine")?;
    let attacker = attack_scores(cfg, &ctx, "calibrate/attack")?;
    let delta = calibrate_delta(&genuine, &attacker, cfg.target_fpr)?;
    Ok(Calibration {
        delta,
        tpr: acceptance_rate(&genuine, delta),
        fpr: acceptance_rate(&attacker, delta),
    })
}

/// Writes the prover's received samples for both challenge fields of one
/// legitimate session as interleaved little-endian `f32` I/Q.
pub fn dump_challenge_iq(cfg: &ExperimentConfig, path: &Path) -> Result<usize> {
    let ctx = TrialContext::new(cfg, "");
    let (mut sc, alice, mut bob, mut rng) = setup(cfg, ctx.seed(0, "dump-iq"), None)?;
    let outcome = one_way_authenticate(&mut sc, &alice, &mut bob, permissive(), &mut rng)?;
    let capture = outcome
        .challenge
        .ok_or_else(|| Error::Protocol("no challenge captured".into()))?;
    let fields = capture
        .fields(Station::Bob)
        .ok_or_else(|| Error::Protocol("prover did not hear the challenge".into()))?;
    let samples: Vec<_> = fields.iter().flat_map(|f| f.received.iter().copied()).collect();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    write_iq_f32le(path, &samples)?;
    Ok(samples.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::PowerModeKind;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            n_auth: 40,
            keylength: 8,
            ..Default::default()
        }
    }

    #[test]
    fn seeds_depend_on_every_coordinate() {
        let base = derive_seed(1, "snr", "10", 0, "genuine");
        assert_ne!(base, derive_seed(2, "snr", "10", 0, "genuine"));
        assert_ne!(base, derive_seed(1, "speed", "10", 0, "genuine"));
        assert_ne!(base, derive_seed(1, "snr", "15", 0, "genuine"));
        assert_ne!(base, derive_seed(1, "snr", "10", 1, "genuine"));
        assert_ne!(base, derive_seed(1, "snr", "10", 0, "attack"));
        assert_eq!(base, derive_seed(1, "snr", "10", 0, "genuine"));
    }

    #[test]
    fn noiseless_genuine_distance_vanishes() {
        let cfg = ExperimentConfig {
            power_mode: PowerModeKind::Noiseless,
            ..small()
        };
        let d = genuine_trial(&cfg, 3).unwrap();
        assert!(d < 1e-9, "{d}");
    }

    #[test]
    fn point_is_reproducible() {
        let cfg = small();
        let a = run_point(&cfg, "").unwrap();
        let b = run_point(&cfg, "").unwrap();
        assert_eq!(a.genuine, b.genuine);
        assert_eq!(a.attacker, b.attacker);
        assert!(a.auc > 0.9, "{}", a.auc);
    }

    #[test]
    fn replay_control_without_update_or_fresh_random() {
        let cfg = ExperimentConfig {
            attack: AttackKind::Replay,
            key_update: false,
            reuse_random: true,
            ..small()
        };
        let d = replay_trial(&cfg, 5).unwrap();
        assert!(d < 0.5, "{d}");
    }
}
