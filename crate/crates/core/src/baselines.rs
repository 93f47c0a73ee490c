//! Comparison schemes and the latency/power accounting.
//!
//! Baseline 1 is a two-message nonce/XOR handshake, baseline 2 a nonce/digest
//! handshake. Both work on byte keys obtained by quantizing the reflection
//! coefficients; neither touches the physical layer.

use rand::Rng;
use sha2::{Digest, Sha256};

use crate::adversary::leaked_information;
use crate::channel::{db_to_linear, dbm_to_watts, path_loss_gain, LinkGeometry, DEFAULT_NOISE_DBM};
use crate::error::{Error, Result};
use crate::phy::OfdmConfig;
use crate::protocol::{PidKey, B_MIN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Ours,
    Baseline1,
    Baseline2,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Ours, Scheme::Baseline1, Scheme::Baseline2];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Ours => "ours",
            Scheme::Baseline1 => "baseline1",
            Scheme::Baseline2 => "baseline2",
        }
    }
}

/// Per-operation time and power constants.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct BaselineCostModel {
    pub t_tx: f64,
    pub t_rand: f64,
    pub t_verify: f64,
    pub t_xor: f64,
    pub t_decoding: f64,
    pub t_hash: f64,
    pub t_gen: f64,
    pub p_decoding_mw: f64,
    pub p_xor_mw: f64,
    pub p_hash_mw: f64,
    pub snr_target_db: f64,
    pub noise_dbm: f64,
}

impl Default for BaselineCostModel {
    fn default() -> Self {
        BaselineCostModel {
            // one 10-symbol field at two 80 us OFDM symbols per device symbol
            t_tx: 1.6e-3,
            t_rand: 1.0e-5,
            t_verify: 1.0e-5,
            t_xor: 1.0e-6,
            t_decoding: 5.0e-5,
            t_hash: 2.0e-3,
            t_gen: 1.0e-4,
            p_decoding_mw: 0.03,
            p_xor_mw: 0.01,
            p_hash_mw: 7.5,
            snr_target_db: 10.0,
            noise_dbm: DEFAULT_NOISE_DBM,
        }
    }
}

impl BaselineCostModel {
    pub fn validate(&self) -> Result<()> {
        let times = [
            ("t_tx", self.t_tx),
            ("t_rand", self.t_rand),
            ("t_verify", self.t_verify),
            ("t_xor", self.t_xor),
            ("t_decoding", self.t_decoding),
            ("t_hash", self.t_hash),
            ("t_gen", self.t_gen),
            ("p_decoding_mw", self.p_decoding_mw),
            ("p_xor_mw", self.p_xor_mw),
        ];
        let mut bad: Vec<String> = times
            .iter()
            .filter(|(_, v)| !(*v >= 0.0 && v.is_finite()))
            .map(|(n, v)| format!("{n} must be nonnegative, got {v}"))
            .collect();
        if !(5.0..=10.0).contains(&self.p_hash_mw) {
            bad.push(format!("p_hash_mw must be within [5, 10], got {}", self.p_hash_mw));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(bad))
        }
    }

    /// Sets `t_tx` to the air time of one field.
    pub fn with_field_airtime(mut self, key_len: usize, ofdm: &OfdmConfig, span: usize) -> Self {
        self.t_tx = field_airtime_s(key_len, ofdm, span);
        self
    }
}

/// Air time of one `len`-symbol field.
pub fn field_airtime_s(len: usize, ofdm: &OfdmConfig, span: usize) -> f64 {
    (len * span) as f64 * ofdm.symbol_duration_s()
}

/// Latency of `n_auth` authentications.
pub fn latency(scheme: Scheme, m: &BaselineCostModel, n_auth: usize) -> f64 {
    let single = match scheme {
        Scheme::Ours => 4.0 * m.t_tx + m.t_rand + m.t_verify,
        Scheme::Baseline1 => {
            4.0 * m.t_tx + m.t_rand + m.t_verify + 2.0 * m.t_xor + 4.0 * m.t_decoding
        }
        Scheme::Baseline2 => {
            2.0 * m.t_gen
                + 2.0 * m.t_tx
                + 2.0 * m.t_hash
                + m.t_rand
                + m.t_verify
                + 2.0 * m.t_decoding
        }
    };
    single * n_auth as f64
}

/// Smallest transmit power in mW that reaches the SNR target over a link of
/// `distance_m` whose amplitude gain follows the reference law, capped at 1.
pub fn rf_power_mw(m: &BaselineCostModel, distance_m: f64) -> Result<f64> {
    let gain = path_loss_gain(&LinkGeometry::new(distance_m)?)?.min(1.0);
    let watts = db_to_linear(m.snr_target_db) * dbm_to_watts(m.noise_dbm) / (gain * gain);
    Ok(watts * 1e3)
}

/// Computation power in mW per authentication from the scheme's operations.
pub fn computation_power_mw(scheme: Scheme, m: &BaselineCostModel) -> f64 {
    match scheme {
        Scheme::Ours => 0.0,
        Scheme::Baseline1 => 2.0 * m.p_xor_mw + 4.0 * m.p_decoding_mw,
        Scheme::Baseline2 => 2.0 * m.p_hash_mw + 2.0 * m.p_decoding_mw,
    }
}

/// Total power per authentication: RF requirement plus computation.
pub fn power(scheme: Scheme, m: &BaselineCostModel, distance_m: f64) -> Result<f64> {
    Ok(rf_power_mw(m, distance_m)? + computation_power_mw(scheme, m))
}

/// Instrumented per-authentication operation counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OpCounts {
    pub transmissions: usize,
    /// Bits run through XOR.
    pub xor_bits: usize,
    /// Bits fed to the digest.
    pub hash_bits: usize,
    pub decodes: usize,
}

impl OpCounts {
    /// Work that scales with the processed bits.
    pub fn bit_operations(&self) -> usize {
        self.xor_bits + self.hash_bits
    }
}

/// Maps reflection coefficients in `[B_MIN, 1]` to bytes.
pub fn quantize_key(key: &[f64]) -> Vec<u8> {
    key.iter()
        .map(|c| (((c - B_MIN) / (1.0 - B_MIN)).clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect()
}

pub fn dequantize_key(bytes: &[u8]) -> Vec<f64> {
    bytes
        .iter()
        .map(|b| B_MIN + (*b as f64 / 255.0) * (1.0 - B_MIN))
        .collect()
}

/// Messages a passive listener sees during a baseline handshake.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaselineTranscript {
    pub nonce: Vec<u8>,
    pub reply: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaselineOutcome {
    pub accepted: bool,
    pub transcript: BaselineTranscript,
    pub ops: OpCounts,
}

fn nonce<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<u8> {
    (0..len).map(|_| rng.random()).collect()
}

fn xor(a: &[u8], b: &[u8]) -> Vec<u8> {
    a.iter().zip(b).map(|(x, y)| x ^ y).collect()
}

/// Verifier sends a nonce, prover answers `nonce XOR key`, verifier checks
/// against its stored key.
pub fn baseline1_xor_auth<R: Rng + ?Sized>(
    stored: &PidKey,
    prover_key: &PidKey,
    rng: &mut R,
) -> BaselineOutcome {
    let expected = quantize_key(stored.coeffs());
    let presented = quantize_key(prover_key.coeffs());
    let n = nonce(expected.len(), rng);
    let reply = xor(&n, &presented);
    let accepted = xor(&n, &reply) == expected;
    let bits = 8 * expected.len();
    BaselineOutcome {
        accepted,
        transcript: BaselineTranscript { nonce: n, reply },
        ops: OpCounts {
            transmissions: 4,
            xor_bits: 2 * bits,
            hash_bits: 0,
            decodes: 4,
        },
    }
}

/// What an eavesdropper recovers from a baseline-1 transcript: plaintext
/// XOR ciphertext.
pub fn baseline1_eavesdrop(transcript: &BaselineTranscript) -> Vec<f64> {
    dequantize_key(&xor(&transcript.nonce, &transcript.reply))
}

fn digest(key: &[u8], nonce: &[u8]) -> Vec<u8> {
    let mut h = Sha256::new();
    h.update(key);
    h.update(nonce);
    h.finalize().to_vec()
}

/// Verifier sends a nonce, prover answers `H(key || nonce)`, verifier
/// recomputes.
pub fn baseline2_hash_auth<R: Rng + ?Sized>(
    stored: &PidKey,
    prover_key: &PidKey,
    rng: &mut R,
) -> BaselineOutcome {
    let n = nonce(stored.len(), rng);
    let reply = digest(&quantize_key(prover_key.coeffs()), &n);
    baseline2_check(stored, n, reply)
}

/// Checks a digest reply to `nonce` against the stored key.
pub fn baseline2_check(stored: &PidKey, nonce: Vec<u8>, reply: Vec<u8>) -> BaselineOutcome {
    let key = quantize_key(stored.coeffs());
    let accepted = digest(&key, &nonce) == reply;
    let bits = 8 * (key.len() + nonce.len());
    BaselineOutcome {
        accepted,
        transcript: BaselineTranscript { nonce, reply },
        ops: OpCounts {
            transmissions: 2,
            xor_bits: 0,
            hash_bits: 2 * bits,
            decodes: 2,
        },
    }
}

/// A baseline-2 eavesdropper can only read the digest bytes as a key guess.
pub fn baseline2_eavesdrop(transcript: &BaselineTranscript, key_len: usize) -> Vec<f64> {
    let take: Vec<u8> = transcript.reply.iter().cycle().take(key_len).copied().collect();
    dequantize_key(&take)
}

/// Leaked information of a baseline eavesdropper over `sessions` honest
/// handshakes with fresh random keys.
pub fn baseline_leaked_information<R: Rng + ?Sized>(
    scheme: Scheme,
    sessions: usize,
    key_len: usize,
    bins: usize,
    rng: &mut R,
) -> Result<f64> {
    let mut truth = Vec::with_capacity(sessions * key_len);
    let mut inferred = Vec::with_capacity(sessions * key_len);
    for _ in 0..sessions {
        let key = PidKey::random(key_len, rng)?;
        let recovered = match scheme {
            Scheme::Baseline1 => baseline1_eavesdrop(&baseline1_xor_auth(&key, &key, rng).transcript),
            Scheme::Baseline2 => baseline2_eavesdrop(&baseline2_hash_auth(&key, &key, rng).transcript, key_len),
            Scheme::Ours => {
                return Err(Error::Config(
                    "the physical-layer scheme is measured through the scenario, not a transcript".into(),
                ))
            }
        };
        truth.extend_from_slice(key.coeffs());
        inferred.extend(recovered);
    }
    leaked_information(&truth, &inferred, bins)
}

/// Operation counts of one authentication of ours: four field
/// transmissions and no bitwise work, whatever the key length.
pub fn ours_op_counts() -> OpCounts {
    OpCounts {
        transmissions: 4,
        xor_bits: 0,
        hash_bits: 0,
        decodes: 0,
    }
}
