//! Challenge-response authentication over harvested-power ratios.
//!
//! The verifier backscatters a fresh random vector `D` followed by its own key
//! `K_i`. Because both fields ride the same ambient frame through the same
//! channel, the prover's per-symbol reading ratio is `D / K_i`; multiplying by
//! its stored copy of `K_i` recovers `D`. The prover answers with the
//! estimate and its own key `K_j`, and the verifier reverses the ratio with
//! the `D` it remembers to obtain an estimate of `K_j`, which it compares to
//! the stored key in L1 distance.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::phy::reading_values;
use crate::scenario::{Scenario, StageCapture, Station};

/// Smallest power-domain reflection coefficient a key may use.
pub const B_MIN: f64 = 0.1;
pub const MIN_KEY_LEN: usize = 5;
pub const MAX_KEY_LEN: usize = 30;

/// Opaque upper-layer device reference number.
pub type DeviceId = u32;

/// Device fingerprint: power-domain reflection coefficients in `[B_MIN, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PidKey {
    coeffs: Vec<f64>,
}

impl PidKey {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if !(MIN_KEY_LEN..=MAX_KEY_LEN).contains(&coeffs.len()) {
            return Err(Error::InvalidKey(format!(
                "key length {} outside [{MIN_KEY_LEN}, {MAX_KEY_LEN}]",
                coeffs.len()
            )));
        }
        if let Some(bad) = coeffs.iter().find(|c| !(B_MIN..=1.0).contains(*c)) {
            return Err(Error::InvalidKey(format!("coefficient {bad} outside [{B_MIN}, 1]")));
        }
        Ok(PidKey { coeffs })
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Result<Self> {
        PidKey::new(generate_random_number(len, rng))
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn l1_distance(&self, other: &[f64]) -> Result<f64> {
        l1_distance(&self.coeffs, other)
    }
}

pub fn l1_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Length(format!(
            "cannot compare vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum())
}

/// Keys of every known device, including this device's own.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceRegistry {
    entries: BTreeMap<DeviceId, PidKey>,
    own_id: DeviceId,
}

impl DeviceRegistry {
    pub fn new(own_id: DeviceId, entries: BTreeMap<DeviceId, PidKey>) -> Result<Self> {
        if !entries.contains_key(&own_id) {
            return Err(Error::Config(format!("own id {own_id} missing from registry")));
        }
        let len = entries[&own_id].len();
        if entries.values().any(|k| k.len() != len) {
            return Err(Error::InvalidKey("registry keys differ in length".into()));
        }
        Ok(DeviceRegistry { entries, own_id })
    }

    /// `n_devices` random keys with ids `0..n_devices`.
    pub fn random_population<R: Rng + ?Sized>(
        n_devices: usize,
        key_len: usize,
        rng: &mut R,
    ) -> Result<BTreeMap<DeviceId, PidKey>> {
        (0..n_devices as DeviceId)
            .map(|id| Ok((id, PidKey::random(key_len, rng)?)))
            .collect()
    }

    pub fn own_id(&self) -> DeviceId {
        self.own_id
    }

    pub fn own_key(&self) -> &PidKey {
        &self.entries[&self.own_id]
    }

    pub fn key(&self, id: DeviceId) -> Result<&PidKey> {
        self.entries
            .get(&id)
            .ok_or_else(|| Error::Protocol(format!("device {id} is not registered")))
    }

    pub fn entries(&self) -> &BTreeMap<DeviceId, PidKey> {
        &self.entries
    }

    /// Applies a broadcast key update `(id, D)`: the stored key becomes the
    /// geometric mean of itself and `D`.
    pub fn apply_update(&mut self, id: DeviceId, random: &[f64]) -> Result<()> {
        let old = self.key(id)?.clone();
        let new = key_update(&old, random)?;
        self.entries.insert(id, new);
        Ok(())
    }
}

/// A fresh random vector, elementwise uniform on `[B_MIN, 1]`.
pub fn generate_random_number<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(B_MIN..=1.0)).collect()
}

/// L1 acceptance threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuthThreshold {
    delta: f64,
}

impl AuthThreshold {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Config(format!("threshold must be positive, got {delta}")));
        }
        Ok(AuthThreshold { delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn accepts(&self, l1: f64) -> bool {
        l1 <= self.delta
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuthDecision {
    pub accepted: bool,
    /// Infinite when the session aborted before a key estimate existed.
    pub l1_distance: f64,
    pub cause: Option<String>,
}

impl AuthDecision {
    fn aborted(cause: String) -> Self {
        AuthDecision {
            accepted: false,
            l1_distance: f64::INFINITY,
            cause: Some(cause),
        }
    }
}

/// Prover-side estimate of the verifier's random vector:
/// `(P1 / P2) * K_i`, clamped to `[0, 1]`.
pub fn prover_estimate_random(p1: &[f64], p2: &[f64], stored_key: &[f64]) -> Result<Vec<f64>> {
    ratio_times(p1, p2, stored_key, "P2")
}

/// Verifier-side estimate of the prover's key: `D * P4 / P3`, clamped to `[0, 1]`.
pub fn verifier_estimate_key(p3: &[f64], p4: &[f64], d_true: &[f64]) -> Result<Vec<f64>> {
    ratio_times(p4, p3, d_true, "P3")
}

fn ratio_times(num: &[f64], den: &[f64], scale: &[f64], den_name: &str) -> Result<Vec<f64>> {
    if num.len() != den.len() || num.len() != scale.len() {
        return Err(Error::Length(format!(
            "reading vectors ({}, {}) do not match key length {}",
            num.len(),
            den.len(),
            scale.len()
        )));
    }
    num.iter()
        .zip(den)
        .zip(scale)
        .enumerate()
        .map(|(l, ((n, d), s))| {
            if *d <= 0.0 {
                Err(Error::DegenerateMeasurement(format!("{den_name}[{l}] is zero")))
            } else {
                Ok((n / d * s).clamp(0.0, 1.0))
            }
        })
        .collect()
}

/// L1 threshold test of an estimated key against the stored one.
pub fn verify(k_estimated: &[f64], stored: &PidKey, threshold: AuthThreshold) -> Result<AuthDecision> {
    let l1 = stored.l1_distance(k_estimated)?;
    Ok(AuthDecision {
        accepted: threshold.accepts(l1),
        l1_distance: l1,
        cause: None,
    })
}

/// Post-authentication key refresh: elementwise `sqrt(K * D)`.
pub fn key_update(key: &PidKey, random: &[f64]) -> Result<PidKey> {
    if key.len() != random.len() {
        return Err(Error::Length(format!(
            "key length {} and random length {} differ",
            key.len(),
            random.len()
        )));
    }
    let coeffs = key
        .coeffs()
        .iter()
        .zip(random)
        .map(|(k, d)| (k * d).sqrt().clamp(B_MIN, 1.0))
        .collect();
    PidKey::new(coeffs)
}

/// Returns the registered device whose key is closest in L1 to the estimate,
/// skipping the registry's own entry. Ties go to the lowest id.
pub fn identify_device(k_estimated: &[f64], registry: &DeviceRegistry) -> Result<DeviceId> {
    let mut best: Option<(f64, DeviceId)> = None;
    for (&id, key) in registry.entries() {
        if id == registry.own_id() {
            continue;
        }
        let d = key.l1_distance(k_estimated)?;
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, id));
        }
    }
    best.map(|(_, id)| id)
        .ok_or_else(|| Error::Protocol("registry holds no other devices".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SessionStage {
    ChallengeSent,
    Responded,
    Decided,
}

impl SessionStage {
    pub fn name(self) -> &'static str {
        match self {
            SessionStage::ChallengeSent => "challenge",
            SessionStage::Responded => "response",
            SessionStage::Decided => "decision",
        }
    }
}

/// State of one challenge-response exchange.
#[derive(Debug, Clone, PartialEq)]
pub struct AuthSession {
    pub verifier_id: DeviceId,
    pub prover_id: DeviceId,
    pub d_true: Vec<f64>,
    pub d_estimated: Option<Vec<f64>>,
    pub k_estimated: Option<Vec<f64>>,
    pub stage: SessionStage,
    /// Prover-side readings of the challenge fields.
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    /// Verifier-side readings of the response fields.
    pub p3: Vec<f64>,
    pub p4: Vec<f64>,
    pub decision: Option<bool>,
    pub l1_distance: Option<f64>,
}

impl AuthSession {
    fn new(verifier_id: DeviceId, prover_id: DeviceId, d_true: Vec<f64>) -> Self {
        AuthSession {
            verifier_id,
            prover_id,
            d_true,
            d_estimated: None,
            k_estimated: None,
            stage: SessionStage::ChallengeSent,
            p1: Vec::new(),
            p2: Vec::new(),
            p3: Vec::new(),
            p4: Vec::new(),
            decision: None,
            l1_distance: None,
        }
    }

    fn advance(&mut self, to: SessionStage) -> Result<()> {
        if to <= self.stage {
            return Err(Error::Protocol(format!(
                "session cannot move from {} to {}",
                self.stage.name(),
                to.name()
            )));
        }
        self.stage = to;
        Ok(())
    }

    fn decide(&mut self, decision: &AuthDecision) -> Result<()> {
        self.advance(SessionStage::Decided)?;
        self.decision = Some(decision.accepted);
        self.l1_distance = Some(decision.l1_distance);
        Ok(())
    }

    /// One tab-separated record per completed stage. `attacker` adds a
    /// trailing attacker-kind column.
    pub fn transcript(&self, attacker: Option<&str>) -> Vec<String> {
        let mut lines = Vec::new();
        let tail = |s: &mut String| {
            if let Some(kind) = attacker {
                let _ = write!(s, "\tattacker={kind}");
            }
        };
        let mut line = format!(
            "challenge\tverifier={}\tprover={}\td={}\tp1={}\tp2={}",
            self.verifier_id,
            self.prover_id,
            join(&self.d_true),
            join(&self.p1),
            join(&self.p2)
        );
        if let Some(d) = &self.d_estimated {
            let _ = write!(line, "\td_est={}", join(d));
        }
        tail(&mut line);
        lines.push(line);
        if self.stage >= SessionStage::Responded {
            let mut line = format!(
                "response\tverifier={}\tprover={}\tp3={}\tp4={}",
                self.verifier_id,
                self.prover_id,
                join(&self.p3),
                join(&self.p4)
            );
            if let Some(k) = &self.k_estimated {
                let _ = write!(line, "\tk_est={}", join(k));
            }
            tail(&mut line);
            lines.push(line);
        }
        if let (Some(accepted), Some(l1)) = (self.decision, self.l1_distance) {
            let mut line = format!(
                "decision\tverifier={}\tprover={}\taccept={accepted}\tl1={l1}",
                self.verifier_id, self.prover_id
            );
            tail(&mut line);
            lines.push(line);
        }
        lines
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.6e}")).collect::<Vec<_>>().join(",")
}

/// A legitimate device: where it sits and what it knows.
#[derive(Debug, Clone, PartialEq)]
pub struct Device {
    pub station: Station,
    pub registry: DeviceRegistry,
}

impl Device {
    pub fn new(station: Station, registry: DeviceRegistry) -> Self {
        Device { station, registry }
    }

    pub fn id(&self) -> DeviceId {
        self.registry.own_id()
    }
}

/// Anything that answers a challenge: an honest device or an attacker.
pub trait Responder {
    fn station(&self) -> Station;

    /// Identity presented to the verifier.
    fn claimed_id(&self) -> DeviceId;

    /// The two response fields, given the challenge stage as heard at this
    /// responder's station. Also returns the responder's estimate of `D`
    /// when it forms one.
    fn respond(
        &mut self,
        verifier_id: DeviceId,
        challenge: &StageCapture,
        rng: &mut ChaCha8Rng,
    ) -> Result<Response>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    pub fields: [Vec<f64>; 2],
    pub d_estimated: Option<Vec<f64>>,
}

/// Readings of both fields of a stage at one station.
pub fn stage_readings(capture: &StageCapture, station: Station) -> Result<(Vec<f64>, Vec<f64>)> {
    let fields = capture
        .fields(station)
        .ok_or_else(|| Error::Protocol(format!("{station:?} did not hear the stage")))?;
    Ok((
        reading_values(&fields[0].readings),
        reading_values(&fields[1].readings),
    ))
}

impl Responder for Device {
    fn station(&self) -> Station {
        self.station
    }

    fn claimed_id(&self) -> DeviceId {
        self.id()
    }

    fn respond(
        &mut self,
        verifier_id: DeviceId,
        challenge: &StageCapture,
        _rng: &mut ChaCha8Rng,
    ) -> Result<Response> {
        let (p1, p2) = stage_readings(challenge, self.station)?;
        let stored = self.registry.key(verifier_id)?;
        let d_hat = prover_estimate_random(&p1, &p2, stored.coeffs())?;
        Ok(Response {
            fields: [d_hat.clone(), self.registry.own_key().coeffs().to_vec()],
            d_estimated: Some(d_hat),
        })
    }
}

/// Outcome of one direction of authentication.
#[derive(Debug, Clone)]
pub struct SessionOutcome {
    pub session: AuthSession,
    pub decision: AuthDecision,
    pub challenge: Option<StageCapture>,
    pub response: Option<StageCapture>,
}

/// Challenge stage: the verifier backscatters `d` then its own key.
/// The prover's readings land in `session.p1`/`p2`.
pub fn challenge(
    scenario: &mut Scenario,
    verifier: &Device,
    prover_id: DeviceId,
    prover_station: Station,
    d: Vec<f64>,
) -> Result<(AuthSession, StageCapture)> {
    verifier.registry.key(prover_id)?;
    let own = verifier.registry.own_key().coeffs();
    if d.len() != own.len() {
        return Err(Error::Length(format!(
            "random number length {} differs from key length {}",
            d.len(),
            own.len()
        )));
    }
    let capture = scenario.send_stage(verifier.station, [&d, own], &[prover_station])?;
    let mut session = AuthSession::new(verifier.id(), prover_id, d);
    if let Ok((p1, p2)) = stage_readings(&capture, prover_station) {
        session.p1 = p1;
        session.p2 = p2;
    }
    Ok((session, capture))
}

/// Response stage: the responder's fields are backscattered back to the
/// verifier, who records `P3`, `P4`.
pub fn respond<P: Responder + ?Sized>(
    scenario: &mut Scenario,
    verifier: &Device,
    session: &mut AuthSession,
    challenge: &StageCapture,
    responder: &mut P,
    rng: &mut ChaCha8Rng,
) -> Result<StageCapture> {
    if session.stage != SessionStage::ChallengeSent {
        return Err(Error::Protocol("response requires a pending challenge".into()));
    }
    let response = responder.respond(verifier.id(), challenge, rng)?;
    session.d_estimated = response.d_estimated;
    let [f1, f2] = &response.fields;
    let capture = scenario.send_stage(responder.station(), [f1, f2], &[verifier.station])?;
    let (p3, p4) = stage_readings(&capture, verifier.station)?;
    session.p3 = p3;
    session.p4 = p4;
    session.advance(SessionStage::Responded)?;
    Ok(capture)
}

/// Runs one full challenge-response with a caller-chosen random vector.
pub fn authenticate_with<P: Responder + ?Sized>(
    scenario: &mut Scenario,
    verifier: &Device,
    responder: &mut P,
    d: Vec<f64>,
    threshold: AuthThreshold,
    rng: &mut ChaCha8Rng,
) -> Result<SessionOutcome> {
    let prover_id = responder.claimed_id();
    let stored = verifier.registry.key(prover_id)?.clone();
    let (mut session, challenge_capture) =
        challenge(scenario, verifier, prover_id, responder.station(), d)?;
    scenario.advance_response_delay(stored.len());

    let response_capture = match respond(scenario, verifier, &mut session, &challenge_capture, responder, rng) {
        Ok(c) => c,
        Err(e) => return abort(session, e, Some(challenge_capture), None),
    };
    let decision = match verifier_estimate_key(&session.p3, &session.p4, &session.d_true) {
        Ok(k) => {
            let decision = verify(&k, &stored, threshold)?;
            session.k_estimated = Some(k);
            decision
        }
        Err(e) => return abort(session, e, Some(challenge_capture), Some(response_capture)),
    };
    session.decide(&decision)?;
    Ok(SessionOutcome {
        session,
        decision,
        challenge: Some(challenge_capture),
        response: Some(response_capture),
    })
}

/// Measurement failures end the session as a reject; anything else is a
/// setup error and propagates.
fn abort(
    mut session: AuthSession,
    err: Error,
    challenge: Option<StageCapture>,
    response: Option<StageCapture>,
) -> Result<SessionOutcome> {
    match err {
        Error::DegenerateMeasurement(_) | Error::Measurement(_) => {
            let decision = AuthDecision::aborted(err.to_string());
            session.stage = SessionStage::Decided;
            session.decision = Some(false);
            session.l1_distance = Some(decision.l1_distance);
            Ok(SessionOutcome {
                session,
                decision,
                challenge,
                response,
            })
        }
        other => Err(other),
    }
}

/// One-way authentication of `responder` by `verifier` with a fresh random
/// vector.
pub fn one_way_authenticate<P: Responder + ?Sized>(
    scenario: &mut Scenario,
    verifier: &Device,
    responder: &mut P,
    threshold: AuthThreshold,
    rng: &mut ChaCha8Rng,
) -> Result<SessionOutcome> {
    let len = verifier.registry.own_key().len();
    let d = generate_random_number(len, scenario.rng());
    authenticate_with(scenario, verifier, responder, d, threshold, rng)
}

/// Both devices authenticate each other with independent random vectors.
/// Success requires both directions to accept.
pub fn mutual_authenticate(
    scenario: &mut Scenario,
    a: &mut Device,
    b: &mut Device,
    threshold: AuthThreshold,
    rng: &mut ChaCha8Rng,
) -> Result<(SessionOutcome, SessionOutcome)> {
    let ab = one_way_authenticate(scenario, a, b, threshold, rng)?;
    scenario.advance_response_delay(a.registry.own_key().len());
    let ba = one_way_authenticate(scenario, b, a, threshold, rng)?;
    Ok((ab, ba))
}

/// Larger of the two directional distances: the mutual exchange accepts at
/// `delta` exactly when this is at most `delta`.
pub fn mutual_distance(ab: &AuthDecision, ba: &AuthDecision) -> f64 {
    ab.l1_distance.max(ba.l1_distance)
}

/// After a successful mutual exchange each device refreshes its own key with
/// the random vector it generated and broadcasts `(id, D)`; every listed
/// registry applies the same update.
pub fn broadcast_key_update(
    devices: &mut [&mut Device],
    updates: &[(DeviceId, Vec<f64>)],
) -> Result<()> {
    for device in devices.iter_mut() {
        for (id, d) in updates {
            if device.registry.entries().contains_key(id) {
                device.registry.apply_update(*id, d)?;
            }
        }
    }
    Ok(())
}
