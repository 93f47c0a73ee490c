//! Attack models: impersonation, naive and smart eavesdropping, replay and
//! counterfeiting, plus the leaked-information metric.
//!
//! Every active attacker sits at [`Station::Eve`] and talks to the verifier
//! through its own channels; passive attackers work on the stages Eve
//! overheard.

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::phy::{cp_copy_window, cp_subtract, mean_power, pilot_symbol, reading_values, OfdmConfig};
use crate::protocol::{
    authenticate_with, generate_random_number, stage_readings, AuthDecision, AuthThreshold,
    Device, DeviceId, Responder, Response, SessionOutcome,
};
use crate::scenario::{half_wavelength_m, Scenario, StageCapture, Station};

pub const DEFAULT_LI_BINS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    Impersonation,
    EavesdropNaive,
    EavesdropSmart,
    Replay,
    Counterfeit,
}

impl AttackKind {
    pub const ALL: [AttackKind; 5] = [
        AttackKind::Impersonation,
        AttackKind::EavesdropNaive,
        AttackKind::EavesdropSmart,
        AttackKind::Replay,
        AttackKind::Counterfeit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttackKind::Impersonation => "impersonation",
            AttackKind::EavesdropNaive => "eavesdrop_naive",
            AttackKind::EavesdropSmart => "eavesdrop_smart",
            AttackKind::Replay => "replay",
            AttackKind::Counterfeit => "counterfeit",
        }
    }

    pub fn is_passive(self) -> bool {
        matches!(self, AttackKind::EavesdropNaive | AttackKind::EavesdropSmart)
    }
}

impl std::str::FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AttackKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown attack `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackerConfig {
    pub kind: AttackKind,
    pub distance_to_victim_m: f64,
    pub knows_procedure: bool,
}

impl AttackerConfig {
    pub fn new(kind: AttackKind, distance_to_victim_m: f64) -> Self {
        AttackerConfig {
            kind,
            distance_to_victim_m,
            knows_procedure: true,
        }
    }

    /// Checks the distance against the kind: a smart eavesdropper must sit
    /// within half a wavelength of its victim, a naive one beyond it.
    pub fn validate(&self, carrier_hz: f64) -> Result<()> {
        let d = self.distance_to_victim_m;
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::Config(format!("attacker distance {d} must be positive")));
        }
        let half = half_wavelength_m(carrier_hz);
        match self.kind {
            AttackKind::EavesdropSmart if d >= half => Err(Error::Config(format!(
                "smart eavesdropper at {d} m is not within half a wavelength ({half:.4} m)"
            ))),
            AttackKind::EavesdropNaive if d <= half => Err(Error::Config(format!(
                "naive eavesdropper at {d} m is within half a wavelength ({half:.4} m)"
            ))),
            _ => Ok(()),
        }
    }
}

/// Claims the victim's identity and backscatters uniform guesses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Impersonator {
    pub victim_id: DeviceId,
}

impl Responder for Impersonator {
    fn station(&self) -> Station {
        Station::Eve
    }

    fn claimed_id(&self) -> DeviceId {
        self.victim_id
    }

    fn respond(&mut self, _: DeviceId, challenge: &StageCapture, rng: &mut ChaCha8Rng) -> Result<Response> {
        let len = challenge
            .fields(Station::Eve)
            .map(|f| f[0].readings.len())
            .ok_or_else(|| Error::Protocol("attacker did not hear the challenge".into()))?;
        Ok(Response {
            fields: [generate_random_number(len, rng), generate_random_number(len, rng)],
            d_estimated: None,
        })
    }
}

/// Forges the response from the overheard challenge ratio `v1/v2 = D/K_i`
/// and guessed factors: sends `(v1/v2) * C_i` and `C_j`. The verifier then
/// computes `K_i * C_j / C_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Counterfeiter {
    pub victim_id: DeviceId,
    pub guess_i: Vec<f64>,
    pub guess_j: Vec<f64>,
}

impl Counterfeiter {
    /// Guesses drawn uniform on `[B_MIN, 1]`.
    pub fn random(victim_id: DeviceId, len: usize, rng: &mut ChaCha8Rng) -> Self {
        Counterfeiter {
            victim_id,
            guess_i: generate_random_number(len, rng),
            guess_j: generate_random_number(len, rng),
        }
    }
}

impl Responder for Counterfeiter {
    fn station(&self) -> Station {
        Station::Eve
    }

    fn claimed_id(&self) -> DeviceId {
        self.victim_id
    }

    fn respond(&mut self, _: DeviceId, challenge: &StageCapture, _: &mut ChaCha8Rng) -> Result<Response> {
        let (v1, v2) = stage_readings(challenge, Station::Eve)?;
        if v1.len() != self.guess_i.len() || self.guess_j.len() != self.guess_i.len() {
            return Err(Error::Length("counterfeit guesses do not match the field length".into()));
        }
        let forged: Vec<f64> = v1
            .iter()
            .zip(&v2)
            .zip(&self.guess_i)
            .map(|((a, b), c)| if *b > 0.0 { (a / b * c).clamp(0.0, 1.0) } else { 0.0 })
            .collect();
        Ok(Response {
            fields: [forged.clone(), self.guess_j.clone()],
            d_estimated: Some(forged),
        })
    }
}

/// Key the verifier reconstructs from a counterfeit response in a noiseless
/// channel: `K_i * C_j / C_i`, clamped like the real estimator.
pub fn counterfeit_key_estimate(k_i: &[f64], c_i: &[f64], c_j: &[f64]) -> Vec<f64> {
    k_i.iter()
        .zip(c_i)
        .zip(c_j)
        .map(|((k, ci), cj)| (k * cj / ci).clamp(0.0, 1.0))
        .collect()
}

/// The closed form `K_i / (C_i * C_j)`, which differs from what the signal
/// chain produces; kept for side-by-side reporting.
pub fn counterfeit_key_estimate_alt(k_i: &[f64], c_i: &[f64], c_j: &[f64]) -> Vec<f64> {
    k_i.iter()
        .zip(c_i)
        .zip(c_j)
        .map(|((k, ci), cj)| k / (ci * cj))
        .collect()
}

/// Power-faithful recording of a response stage: per symbol, the two field
/// readings scaled so the larger becomes full reflection.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayRecording {
    pub victim_id: DeviceId,
    pub fields: [Vec<f64>; 2],
}

impl ReplayRecording {
    pub fn from_capture(victim_id: DeviceId, response: &StageCapture) -> Result<Self> {
        let (v3, v4) = stage_readings(response, Station::Eve)?;
        let mut f1 = Vec::with_capacity(v3.len());
        let mut f2 = Vec::with_capacity(v4.len());
        for (a, b) in v3.iter().zip(&v4) {
            let m = a.max(*b);
            if m > 0.0 {
                f1.push(a / m);
                f2.push(b / m);
            } else {
                f1.push(0.0);
                f2.push(0.0);
            }
        }
        Ok(ReplayRecording {
            victim_id,
            fields: [f1, f2],
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replayer {
    pub recording: ReplayRecording,
}

impl Responder for Replayer {
    fn station(&self) -> Station {
        Station::Eve
    }

    fn claimed_id(&self) -> DeviceId {
        self.recording.victim_id
    }

    fn respond(&mut self, _: DeviceId, _: &StageCapture, _: &mut ChaCha8Rng) -> Result<Response> {
        Ok(Response {
            fields: self.recording.fields.clone(),
            d_estimated: None,
        })
    }
}

/// Runs one session against an impersonator claiming `victim_id`.
pub fn impersonation_attempt(
    scenario: &mut Scenario,
    verifier: &Device,
    victim_id: DeviceId,
    threshold: AuthThreshold,
    rng: &mut ChaCha8Rng,
) -> Result<AuthDecision> {
    let mut attacker = Impersonator { victim_id };
    let len = verifier.registry.own_key().len();
    let d = generate_random_number(len, scenario.rng());
    Ok(authenticate_with(scenario, verifier, &mut attacker, d, threshold, rng)?.decision)
}

/// Runs one session against a counterfeiter with the given guesses.
pub fn counterfeit_attack(
    scenario: &mut Scenario,
    verifier: &Device,
    attacker: &mut Counterfeiter,
    threshold: AuthThreshold,
    rng: &mut ChaCha8Rng,
) -> Result<AuthDecision> {
    let len = verifier.registry.own_key().len();
    let d = generate_random_number(len, scenario.rng());
    Ok(authenticate_with(scenario, verifier, attacker, d, threshold, rng)?.decision)
}

/// Replays a recorded response into a session with random vector `d`.
pub fn replay_attack(
    scenario: &mut Scenario,
    verifier: &Device,
    recording: &ReplayRecording,
    d: Vec<f64>,
    threshold: AuthThreshold,
    rng: &mut ChaCha8Rng,
) -> Result<SessionOutcome> {
    let mut attacker = Replayer {
        recording: recording.clone(),
    };
    authenticate_with(scenario, verifier, &mut attacker, d, threshold, rng)
}

/// What a passive attacker extracted from one overheard stage.
#[derive(Debug, Clone, PartialEq)]
pub struct EavesdropObservation {
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    /// `v1 / v2`, zero where `v2` is zero.
    pub ratio: Vec<f64>,
    pub channel_estimate: Option<Complex64>,
    pub inferred_random: Option<Vec<f64>>,
    pub inferred_key: Option<Vec<f64>>,
}

/// A distant eavesdropper only learns the per-symbol ratio `D / K_i`.
pub fn naive_eavesdrop(capture: &StageCapture) -> Result<EavesdropObservation> {
    let (v1, v2) = stage_readings(capture, Station::Eve)?;
    let ratio = v1
        .iter()
        .zip(&v2)
        .map(|(a, b)| if *b > 0.0 { a / b } else { 0.0 })
        .collect();
    Ok(EavesdropObservation {
        v1,
        v2,
        ratio,
        channel_estimate: None,
        inferred_random: None,
        inferred_key: None,
    })
}

/// Prior knowledge of a near-field eavesdropper.
#[derive(Debug, Clone, PartialEq)]
pub struct SmartKnowledge {
    /// Time-domain pilot symbol (prefix included) at nominal source power.
    pub pilot: Vec<Complex64>,
    pub efficiency: f64,
    /// Its own receiver noise variance, measured in silence.
    pub noise_variance_w: f64,
}

impl SmartKnowledge {
    pub fn new(ofdm: &OfdmConfig, efficiency: f64, noise_variance_w: f64) -> Self {
        SmartKnowledge {
            pilot: pilot_symbol(ofdm),
            efficiency,
            noise_variance_w,
        }
    }
}

/// A near-field eavesdropper assumes it shares the victim's source channel
/// and has unit coupling to the victim. It estimates that channel from the
/// pilot, reads the ambient power off the silent prefix copy, and inverts
/// each field reading: `v / (eta * |h|^2 * P(s))`.
pub fn smart_eavesdrop(capture: &StageCapture, knowledge: &SmartKnowledge) -> Result<EavesdropObservation> {
    let mut obs = naive_eavesdrop(capture)?;
    let fields = capture
        .fields(Station::Eve)
        .ok_or_else(|| Error::Protocol("eavesdropper did not hear the stage".into()))?;
    let ofdm = capture.ambient_for_field(0).config;
    if knowledge.pilot.len() != ofdm.symbol_len() {
        return Err(Error::Config("pilot does not match the OFDM symbol length".into()));
    }
    if !ofdm.pilot_present {
        return Err(Error::Config("smart eavesdropping needs a pilot symbol".into()));
    }
    let n_bd = obs.v1.len();
    let window = ofdm.window_len();
    let sigma2 = knowledge.noise_variance_w;

    let mut estimates: Vec<Vec<f64>> = Vec::with_capacity(2);
    let mut channel = None;
    for field in fields.iter() {
        let copy = cp_copy_window(&field.received, &ofdm)?;
        let pilot_copy = &knowledge.pilot[ofdm.cp_guard + ofdm.n_subcarriers..ofdm.cp_len + ofdm.n_subcarriers];
        let num: Complex64 = pilot_copy.iter().zip(&copy[..window]).map(|(p, y)| p.conj() * y).sum();
        let den: f64 = pilot_copy.iter().map(|p| p.norm_sqr()).sum();
        let h = num / den;
        channel.get_or_insert(h);
        let gain = h.norm_sqr();
        if gain <= 0.0 {
            return Err(Error::DegenerateMeasurement("pilot channel estimate is zero".into()));
        }

        let z = cp_subtract(&field.received, &ofdm)?;
        let group = copy.len() / n_bd;
        let inferred = (0..n_bd)
            .map(|l| {
                let span = l * group..(l + 1) * group;
                let ambient = (mean_power(&copy[span.clone()]) - sigma2).max(0.0) / gain;
                let reflected = (mean_power(&z[span]) - 2.0 * sigma2).max(0.0);
                if ambient > 0.0 {
                    (reflected / (gain * ambient)).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect();
        estimates.push(inferred);
    }
    obs.channel_estimate = channel;
    obs.inferred_key = estimates.pop();
    obs.inferred_random = estimates.pop();
    Ok(obs)
}

/// Readings the eavesdropper took of the two fields, as plain values.
pub fn overheard_values(capture: &StageCapture) -> Result<[Vec<f64>; 2]> {
    let fields = capture
        .fields(Station::Eve)
        .ok_or_else(|| Error::Protocol("eavesdropper did not hear the stage".into()))?;
    Ok([reading_values(&fields[0].readings), reading_values(&fields[1].readings)])
}

/// Uniform guesses standing in for a key the attacker could not solve for.
pub fn blind_guess(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    generate_random_number(len, rng)
}

/// Histogram plug-in mutual information between true and inferred values,
/// normalized by the entropy of the binned true marginal and clipped to
/// `[0, 1]`. Each variable is binned over its own sample range.
pub fn leaked_information(truth: &[f64], inferred: &[f64], bins: usize) -> Result<f64> {
    if truth.len() != inferred.len() {
        return Err(Error::Length(format!(
            "{} true values paired with {} inferred values",
            truth.len(),
            inferred.len()
        )));
    }
    if bins < 2 {
        return Err(Error::Estimator("need at least two bins".into()));
    }
    let needed = 10 * bins * bins;
    if truth.len() < needed {
        return Err(Error::Estimator(format!(
            "{} samples is below the {needed} needed for {bins} bins",
            truth.len()
        )));
    }
    let bx = bin_indices(truth, bins);
    let by = bin_indices(inferred, bins);
    let n = truth.len() as f64;
    let mut joint = vec![0usize; bins * bins];
    let mut px = vec![0usize; bins];
    let mut py = vec![0usize; bins];
    for (x, y) in bx.iter().zip(&by) {
        joint[x * bins + y] += 1;
        px[*x] += 1;
        py[*y] += 1;
    }
    let entropy: f64 = px
        .iter()
        .filter(|c| **c > 0)
        .map(|c| {
            let p = *c as f64 / n;
            -p * p.ln()
        })
        .sum();
    if entropy <= 0.0 {
        return Err(Error::Estimator("true values are constant".into()));
    }
    let mut mi = 0.0;
    for x in 0..bins {
        for y in 0..bins {
            let c = joint[x * bins + y];
            if c > 0 {
                let pxy = c as f64 / n;
                mi += pxy * (pxy * n * n / (px[x] as f64 * py[y] as f64)).ln();
            }
        }
    }
    Ok((mi / entropy).clamp(0.0, 1.0))
}

fn bin_indices(values: &[f64], bins: usize) -> Vec<usize> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = hi - lo;
    values
        .iter()
        .map(|v| {
            if width > 0.0 {
                (((v - lo) / width * bins as f64) as usize).min(bins - 1)
            } else {
                0
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn attacker_distance_rules() {
        let fc = 9e8;
        assert!(AttackerConfig::new(AttackKind::EavesdropSmart, 0.1).validate(fc).is_ok());
        assert!(AttackerConfig::new(AttackKind::EavesdropSmart, 0.2).validate(fc).is_err());
        assert!(AttackerConfig::new(AttackKind::EavesdropNaive, 0.1).validate(fc).is_err());
        assert!(AttackerConfig::new(AttackKind::EavesdropNaive, 1.0).validate(fc).is_ok());
        assert!(AttackerConfig::new(AttackKind::Replay, 0.0).validate(fc).is_err());
    }

    #[test]
    fn attack_names_round_trip() {
        for k in AttackKind::ALL {
            assert_eq!(k.name().parse::<AttackKind>().unwrap(), k);
        }
        assert!("jamming".parse::<AttackKind>().is_err());
    }

    #[test]
    fn li_identity_and_independence() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..20_000).map(|_| rng.random_range(0.1..1.0)).collect();
        let y: Vec<f64> = (0..20_000).map(|_| rng.random_range(0.1..1.0)).collect();
        assert!((leaked_information(&x, &x, 16).unwrap() - 1.0).abs() < 1e-12);
        assert!(leaked_information(&x, &y, 16).unwrap() < 0.05);
        assert!(matches!(leaked_information(&x[..100], &y[..100], 16), Err(Error::Estimator(_))));
    }

    #[test]
    fn li_is_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x: Vec<f64> = (0..5000).map(|_| rng.random_range(0.1..1.0)).collect();
        let scaled: Vec<f64> = x.iter().map(|v| 0.3 * v).collect();
        assert!((leaked_information(&x, &scaled, 16).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn counterfeit_algebra() {
        let k = [0.5, 0.8];
        assert_eq!(counterfeit_key_estimate(&k, &[0.5, 0.8], &[0.3, 0.9]), vec![0.3, 0.9]);
        let alt = counterfeit_key_estimate_alt(&k, &[0.5, 0.5], &[0.5, 0.5]);
        assert!((alt[0] - 2.0).abs() < 1e-12);
    }
}
