//! OFDM ambient carrier, midpoint-hop backscatter waveform and the
//! cyclic-prefix subtraction receiver.
//!
//! The ambient source emits OFDM symbols of `N_t = N + N_cp` samples whose
//! prefix is a copy of the symbol tail. A backscatter device reflects with
//! amplitude `sqrt(B)` during the first half of every OFDM symbol and absorbs
//! during the second half, so only the direct (downlink) path carries a
//! repeated prefix at the receiver. Subtracting `y[n + N]` from `y[n]` over
//! the prefix window cancels the downlink and leaves the reflected component,
//! whose mean power is what a harvester reads.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rustfft::FftPlanner;

use crate::channel::{awgn_with_variance, dbm_to_watts, Tap};
use crate::error::{Error, Result};

pub const DEFAULT_EFFICIENCY: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OfdmConfig {
    pub n_subcarriers: usize,
    pub cp_len: usize,
    pub sample_rate_hz: f64,
    pub tx_power_dbm: f64,
    pub pilot_present: bool,
    /// Leading prefix samples excluded from the measurement window because
    /// they carry inter-symbol interference from the previous symbol. Must be
    /// at least the largest channel delay seen by the receiver.
    pub cp_guard: usize,
}

impl Default for OfdmConfig {
    fn default() -> Self {
        OfdmConfig {
            n_subcarriers: 64,
            cp_len: 16,
            sample_rate_hz: 1.0e6,
            tx_power_dbm: 1.0,
            pilot_present: true,
            cp_guard: 0,
        }
    }
}

impl OfdmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_subcarriers < 2 {
            return Err(Error::Config("need at least two subcarriers".into()));
        }
        if self.cp_len == 0 || self.cp_len >= self.n_subcarriers {
            return Err(Error::Config(format!(
                "cyclic prefix length {} must be in [1, {})",
                self.cp_len, self.n_subcarriers
            )));
        }
        if self.cp_guard >= self.cp_len {
            return Err(Error::Config(format!(
                "prefix guard {} leaves no measurement window in a {}-sample prefix",
                self.cp_guard, self.cp_len
            )));
        }
        if !(self.sample_rate_hz > 0.0) {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        Ok(())
    }

    /// Samples per OFDM symbol, `N + N_cp`.
    pub fn symbol_len(&self) -> usize {
        self.n_subcarriers + self.cp_len
    }

    pub fn symbol_duration_s(&self) -> f64 {
        self.symbol_len() as f64 / self.sample_rate_hz
    }

    /// Measured samples per OFDM symbol after the subtraction.
    pub fn window_len(&self) -> usize {
        self.cp_len - self.cp_guard
    }

    pub fn tx_power_w(&self) -> f64 {
        dbm_to_watts(self.tx_power_dbm)
    }

    /// Largest timing offset of the reflection state change that still keeps
    /// the reflected copy out of the second prefix window.
    pub fn max_timing_offset(&self) -> usize {
        self.cp_len - 1
    }
}

/// Complex baseband samples covering whole OFDM symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct BasebandFrame {
    pub samples: Vec<Complex64>,
    pub n_symbols: usize,
    pub config: OfdmConfig,
}

impl BasebandFrame {
    pub fn symbol(&self, k: usize) -> &[Complex64] {
        let len = self.config.symbol_len();
        &self.samples[k * len..(k + 1) * len]
    }

    pub fn mean_power(&self) -> f64 {
        mean_power(&self.samples)
    }
}

/// One backscatter device symbol: a power-domain reflection coefficient held
/// for `span_ofdm_symbols` OFDM symbols.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackscatterSymbol {
    pub power_coeff: f64,
    pub span_ofdm_symbols: usize,
}

impl BackscatterSymbol {
    pub fn new(power_coeff: f64, span_ofdm_symbols: usize) -> Self {
        BackscatterSymbol {
            power_coeff,
            span_ofdm_symbols,
        }
    }

    /// Converts a coefficient vector to symbols of a common span.
    pub fn message(coeffs: &[f64], span: usize) -> Vec<BackscatterSymbol> {
        coeffs.iter().map(|&b| BackscatterSymbol::new(b, span)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarvestedPowerReading {
    pub value_w: f64,
    pub n_samples_averaged: usize,
    pub harvester_efficiency: f64,
}

/// Extracts the power values of a reading vector.
pub fn reading_values(readings: &[HarvestedPowerReading]) -> Vec<f64> {
    readings.iter().map(|r| r.value_w).collect()
}

pub fn mean_power(samples: &[Complex64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / samples.len() as f64
}

/// Known pilot load: a unit-modulus chirp over all subcarriers.
fn pilot_load(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|k| {
            let phase = -std::f64::consts::PI * (k * k) as f64 / n as f64;
            Complex64::from_polar(1.0, phase)
        })
        .collect()
}

fn random_qpsk_load<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Complex64> {
    let a = std::f64::consts::FRAC_1_SQRT_2;
    (0..n)
        .map(|_| {
            let re = if rng.random::<bool>() { a } else { -a };
            let im = if rng.random::<bool>() { a } else { -a };
            Complex64::new(re, im)
        })
        .collect()
}

fn modulate_symbol(
    load: Vec<Complex64>,
    config: &OfdmConfig,
    ifft: &dyn rustfft::Fft<f64>,
    out: &mut Vec<Complex64>,
) {
    let n = config.n_subcarriers;
    let mut buf = load;
    ifft.process(&mut buf);
    // unitary transform, then scale to the configured average power
    let scale = config.tx_power_w().sqrt() / (n as f64).sqrt();
    buf.iter_mut().for_each(|x| *x *= scale);
    out.extend_from_slice(&buf[n - config.cp_len..]);
    out.extend_from_slice(&buf);
}

/// Time-domain pilot OFDM symbol, prefix included.
pub fn pilot_symbol(config: &OfdmConfig) -> Vec<Complex64> {
    let ifft = FftPlanner::new().plan_fft_inverse(config.n_subcarriers);
    let mut out = Vec::with_capacity(config.symbol_len());
    modulate_symbol(pilot_load(config.n_subcarriers), config, ifft.as_ref(), &mut out);
    out
}

/// Generates `n_symbols` ambient OFDM symbols with random unit QPSK loads.
///
/// Symbol 0 carries the fixed pilot when `pilot_present` is set.
pub fn gen_ofdm_frame<R: Rng + ?Sized>(
    config: &OfdmConfig,
    n_symbols: usize,
    rng: &mut R,
) -> Result<BasebandFrame> {
    config.validate()?;
    if n_symbols == 0 {
        return Err(Error::Config("frame needs at least one OFDM symbol".into()));
    }
    let ifft = FftPlanner::new().plan_fft_inverse(config.n_subcarriers);
    let mut samples = Vec::with_capacity(n_symbols * config.symbol_len());
    for k in 0..n_symbols {
        let load = if k == 0 && config.pilot_present {
            pilot_load(config.n_subcarriers)
        } else {
            random_qpsk_load(config.n_subcarriers, rng)
        };
        modulate_symbol(load, config, ifft.as_ref(), &mut samples);
    }
    Ok(BasebandFrame {
        samples,
        n_symbols,
        config: *config,
    })
}

fn check_taps(taps: &[Tap], config: &OfdmConfig) -> Result<()> {
    if let Some(bad) = taps.iter().find(|t| t.delay >= config.cp_len) {
        return Err(Error::Config(format!(
            "tap delay {} does not fit in the {}-sample cyclic prefix",
            bad.delay, config.cp_len
        )));
    }
    Ok(())
}

/// Linear convolution with a sparse static tap response, truncated to the
/// input length. The channel starts from rest.
pub fn apply_multipath(
    samples: &[Complex64],
    taps: &[Tap],
    config: &OfdmConfig,
) -> Result<Vec<Complex64>> {
    check_taps(taps, config)?;
    let mut out = vec![Complex64::new(0.0, 0.0); samples.len()];
    for tap in taps {
        for n in tap.delay..samples.len() {
            out[n] += tap.gain * samples[n - tap.delay];
        }
    }
    Ok(out)
}

/// Convolution with taps that are held constant over each OFDM symbol.
///
/// Sample `n` uses the taps of the symbol containing `n`. With `cyclic` set,
/// the input is treated as one period of a periodic stream, so samples before
/// the start wrap around to the end of the input.
pub fn convolve_per_symbol(
    input: &[Complex64],
    schedule: &[Vec<Tap>],
    symbol_len: usize,
    cyclic: bool,
) -> Vec<Complex64> {
    let len = input.len();
    let mut out = vec![Complex64::new(0.0, 0.0); len];
    if schedule.is_empty() {
        return out;
    }
    for (n, y) in out.iter_mut().enumerate() {
        let k = (n / symbol_len).min(schedule.len() - 1);
        for tap in &schedule[k] {
            if n >= tap.delay {
                *y += tap.gain * input[n - tap.delay];
            } else if cyclic {
                *y += tap.gain * input[len + n - tap.delay];
            }
        }
    }
    out
}

/// Applies the midpoint-hop reflection waveform with the state change at the
/// middle of each OFDM symbol.
pub fn backscatter_modulate(
    incident: &[Complex64],
    message: &[BackscatterSymbol],
    config: &OfdmConfig,
) -> Result<Vec<Complex64>> {
    backscatter_modulate_with_offset(incident, message, config, 0)
}

/// [`backscatter_modulate`] with the reflect-to-absorb transition moved by
/// `timing_offset` samples from the symbol midpoint.
pub fn backscatter_modulate_with_offset(
    incident: &[Complex64],
    message: &[BackscatterSymbol],
    config: &OfdmConfig,
    timing_offset: isize,
) -> Result<Vec<Complex64>> {
    let n_t = config.symbol_len();
    if timing_offset.unsigned_abs() > config.max_timing_offset() {
        return Err(Error::Config(format!(
            "timing offset {timing_offset} exceeds the tolerated {} samples",
            config.max_timing_offset()
        )));
    }
    let needed: usize = message.iter().map(|s| s.span_ofdm_symbols * n_t).sum();
    if needed > incident.len() {
        return Err(Error::Length(format!(
            "message needs {needed} samples but the incident frame has {}",
            incident.len()
        )));
    }
    let transition = (n_t / 2) as isize + timing_offset;
    let transition = transition as usize;
    let mut out = vec![Complex64::new(0.0, 0.0); incident.len()];
    let mut start = 0;
    for symbol in message {
        if !(0.0..=1.0).contains(&symbol.power_coeff) {
            return Err(Error::Config(format!(
                "reflection coefficient {} outside [0, 1]",
                symbol.power_coeff
            )));
        }
        let amplitude = symbol.power_coeff.sqrt();
        for _ in 0..symbol.span_ofdm_symbols {
            for n in start..start + transition {
                out[n] = incident[n] * amplitude;
            }
            start += n_t;
        }
    }
    Ok(out)
}

/// Subtracts the prefix copy: emits `y[n] - y[n + N]` for every `n` in the
/// measurement window `[cp_guard, cp_len)` of each OFDM symbol.
pub fn cp_subtract(received: &[Complex64], config: &OfdmConfig) -> Result<Vec<Complex64>> {
    config.validate()?;
    let n_t = config.symbol_len();
    if !received.len().is_multiple_of(n_t) {
        return Err(Error::Length(format!(
            "{} samples is not a whole number of {n_t}-sample OFDM symbols",
            received.len()
        )));
    }
    let n = config.n_subcarriers;
    let mut out = Vec::with_capacity(received.len() / n_t * config.window_len());
    for symbol in received.chunks_exact(n_t) {
        for i in config.cp_guard..config.cp_len {
            out.push(symbol[i] - symbol[i + n]);
        }
    }
    Ok(out)
}

/// The second prefix copy `y[n + N]` over the measurement window. The
/// reflecting device is silent there, so this is downlink plus noise.
pub fn cp_copy_window(received: &[Complex64], config: &OfdmConfig) -> Result<Vec<Complex64>> {
    let n_t = config.symbol_len();
    if !received.len().is_multiple_of(n_t) {
        return Err(Error::Length(format!(
            "{} samples is not a whole number of {n_t}-sample OFDM symbols",
            received.len()
        )));
    }
    let n = config.n_subcarriers;
    Ok(received
        .chunks_exact(n_t)
        .flat_map(|s| s[config.cp_guard + n..config.cp_len + n].iter().copied())
        .collect())
}

/// Harvested power `eta * mean |x|^2`.
pub fn harvested_power(signal: &[Complex64], efficiency: f64) -> Result<HarvestedPowerReading> {
    if signal.is_empty() {
        return Err(Error::Measurement("cannot read power of an empty signal".into()));
    }
    if !(efficiency > 0.0 && efficiency <= 1.0) {
        return Err(Error::Measurement(format!(
            "harvester efficiency {efficiency} outside (0, 1]"
        )));
    }
    Ok(HarvestedPowerReading {
        value_w: efficiency * mean_power(signal),
        n_samples_averaged: signal.len(),
        harvester_efficiency: efficiency,
    })
}

/// Splits window samples into per-device-symbol groups of `span` OFDM
/// symbols and reads the harvested power of each group.
pub fn bd_symbol_readings(
    window_samples: &[Complex64],
    config: &OfdmConfig,
    span: usize,
    efficiency: f64,
) -> Result<Vec<HarvestedPowerReading>> {
    let group = config.window_len() * span;
    if group == 0 || !window_samples.len().is_multiple_of(group) {
        return Err(Error::Length(format!(
            "{} window samples do not split into groups of {group}",
            window_samples.len()
        )));
    }
    window_samples
        .chunks_exact(group)
        .map(|g| harvested_power(g, efficiency))
        .collect()
}

/// Per-OFDM-symbol tap sets for the three paths of one device-to-device
/// transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldChannels {
    pub source_to_tx: Vec<Vec<Tap>>,
    pub tx_to_rx: Vec<Vec<Tap>>,
    pub source_to_rx: Vec<Vec<Tap>>,
}

impl FieldChannels {
    /// Channels held fixed for `n_symbols` OFDM symbols.
    pub fn fixed(source_to_tx: &[Tap], tx_to_rx: &[Tap], source_to_rx: &[Tap], n_symbols: usize) -> Self {
        FieldChannels {
            source_to_tx: vec![source_to_tx.to_vec(); n_symbols],
            tx_to_rx: vec![tx_to_rx.to_vec(); n_symbols],
            source_to_rx: vec![source_to_rx.to_vec(); n_symbols],
        }
    }

    fn validate(&self, config: &OfdmConfig, n_symbols: usize) -> Result<()> {
        for schedule in [&self.source_to_tx, &self.tx_to_rx, &self.source_to_rx] {
            if schedule.len() < n_symbols {
                return Err(Error::Length(format!(
                    "channel schedule covers {} of {n_symbols} OFDM symbols",
                    schedule.len()
                )));
            }
            for taps in schedule.iter() {
                check_taps(taps, config)?;
            }
        }
        let spread = |s: &[Vec<Tap>]| s.iter().flatten().map(|t| t.delay).max().unwrap_or(0);
        let direct = spread(&self.source_to_rx);
        let reflected = spread(&self.source_to_tx) + spread(&self.tx_to_rx);
        let isi = direct.max(reflected);
        if isi > config.cp_guard {
            return Err(Error::Config(format!(
                "path delay {isi} reaches into the measurement window (guard {})",
                config.cp_guard
            )));
        }
        Ok(())
    }
}

/// Receiver-side parameters of one transmission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverParams {
    pub span_ofdm_symbols: usize,
    pub efficiency: f64,
    pub noise_variance_w: f64,
    pub timing_offset: isize,
}

impl Default for ReceiverParams {
    fn default() -> Self {
        ReceiverParams {
            span_ofdm_symbols: 1,
            efficiency: DEFAULT_EFFICIENCY,
            noise_variance_w: 0.0,
            timing_offset: 0,
        }
    }
}

/// The reflected signal leaving the transmitting device.
pub fn reflect(
    ambient: &BasebandFrame,
    source_to_tx: &[Vec<Tap>],
    message: &[BackscatterSymbol],
    timing_offset: isize,
) -> Result<Vec<Complex64>> {
    let config = &ambient.config;
    let incident = convolve_per_symbol(&ambient.samples, source_to_tx, config.symbol_len(), true);
    backscatter_modulate_with_offset(&incident, message, config, timing_offset)
}

/// Superposes the reflected path, the direct path and receiver noise.
pub fn receive<R: Rng + ?Sized>(
    reflected: &[Complex64],
    tx_to_rx: &[Vec<Tap>],
    ambient: &BasebandFrame,
    source_to_rx: &[Vec<Tap>],
    noise_variance_w: f64,
    rng: &mut R,
) -> Vec<Complex64> {
    let n_t = ambient.config.symbol_len();
    let backscatter = convolve_per_symbol(reflected, tx_to_rx, n_t, true);
    let downlink = convolve_per_symbol(&ambient.samples, source_to_rx, n_t, true);
    let mut y: Vec<Complex64> = backscatter.iter().zip(&downlink).map(|(b, d)| b + d).collect();
    if noise_variance_w > 0.0 {
        let noise = awgn_with_variance(noise_variance_w, y.len(), rng);
        y.iter_mut().zip(noise).for_each(|(s, w)| *s += w);
    }
    y
}

/// Runs the full transmit chain over a given ambient frame and returns one
/// harvested power reading per message element at the receiver.
pub fn transmit_over_ambient<R: Rng + ?Sized>(
    message: &[f64],
    ambient: &BasebandFrame,
    channels: &FieldChannels,
    params: &ReceiverParams,
    rng: &mut R,
) -> Result<Vec<HarvestedPowerReading>> {
    let received = transmit_samples(message, ambient, channels, params, rng)?;
    let z = cp_subtract(&received, &ambient.config)?;
    bd_symbol_readings(&z, &ambient.config, params.span_ofdm_symbols, params.efficiency)
}

/// Same chain as [`transmit_over_ambient`], stopping at the received samples.
pub fn transmit_samples<R: Rng + ?Sized>(
    message: &[f64],
    ambient: &BasebandFrame,
    channels: &FieldChannels,
    params: &ReceiverParams,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    let config = &ambient.config;
    config.validate()?;
    if params.span_ofdm_symbols == 0 {
        return Err(Error::Config("device symbols must span at least one OFDM symbol".into()));
    }
    let n_symbols = message.len() * params.span_ofdm_symbols;
    if ambient.n_symbols != n_symbols {
        return Err(Error::Length(format!(
            "ambient frame has {} OFDM symbols, message needs {n_symbols}",
            ambient.n_symbols
        )));
    }
    channels.validate(config, n_symbols)?;
    let symbols = BackscatterSymbol::message(message, params.span_ofdm_symbols);
    let reflected = reflect(ambient, &channels.source_to_tx, &symbols, params.timing_offset)?;
    Ok(receive(
        &reflected,
        &channels.tx_to_rx,
        ambient,
        &channels.source_to_rx,
        params.noise_variance_w,
        rng,
    ))
}

/// Generates a fresh ambient frame and sends `message` (power-domain
/// reflection coefficients) through it.
pub fn transmit_bd_message<R: Rng + ?Sized>(
    message: &[f64],
    channels: &FieldChannels,
    config: &OfdmConfig,
    params: &ReceiverParams,
    rng: &mut R,
) -> Result<Vec<HarvestedPowerReading>> {
    if message.is_empty() {
        return Err(Error::Length("empty message".into()));
    }
    let ambient = gen_ofdm_frame(config, message.len() * params.span_ofdm_symbols, rng)?;
    transmit_over_ambient(message, &ambient, channels, params, rng)
}

/// Writes samples as little-endian interleaved `f32` I/Q pairs.
pub fn write_iq_f32le(path: &Path, samples: &[Complex64]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for s in samples {
        w.write_all(&(s.re as f32).to_le_bytes())
            .and_then(|_| w.write_all(&(s.im as f32).to_le_bytes()))
            .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_iq_f32le(path: &Path) -> Result<Vec<Complex64>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(file)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Length(format!("{} bytes is not a whole number of I/Q pairs", bytes.len())));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
            Complex64::new(re as f64, im as f64)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn frame_has_prefix_copy() {
        let cfg = OfdmConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let frame = gen_ofdm_frame(&cfg, 3, &mut rng).unwrap();
        assert_eq!(frame.samples.len(), 3 * 80);
        for k in 0..3 {
            let s = frame.symbol(k);
            for n in 0..16 {
                assert_eq!(s[n], s[n + 64]);
            }
        }
    }

    #[test]
    fn frames_are_deterministic() {
        let cfg = OfdmConfig::default();
        let a = gen_ofdm_frame(&cfg, 4, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = gen_ofdm_frame(&cfg, 4, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_symbol_frame_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(gen_ofdm_frame(&OfdmConfig::default(), 0, &mut rng).is_err());
    }

    #[test]
    fn identity_and_scaling_channels() {
        let cfg = OfdmConfig::default();
        let x: Vec<Complex64> = (0..50).map(|n| c(n as f64, -(n as f64) / 2.0)).collect();
        let y = apply_multipath(&x, &[Tap::new(0, c(1.0, 0.0))], &cfg).unwrap();
        assert_eq!(x, y);
        let g = c(0.3, -0.4);
        let y = apply_multipath(&x, &[Tap::new(0, g)], &cfg).unwrap();
        assert_relative_eq!(mean_power(&y), g.norm_sqr() * mean_power(&x), max_relative = 1e-12);
    }

    #[test]
    fn delay_outside_prefix_is_a_config_error() {
        let cfg = OfdmConfig::default();
        let x = vec![c(1.0, 0.0); 10];
        assert!(matches!(
            apply_multipath(&x, &[Tap::new(16, c(1.0, 0.0))], &cfg),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn modulation_waveform() {
        let cfg = OfdmConfig::default();
        let incident = vec![c(1.0, 1.0); 160];
        let off = backscatter_modulate(&incident, &BackscatterSymbol::message(&[0.0, 0.0], 1), &cfg).unwrap();
        assert!(off.iter().all(|s| s.norm() == 0.0));

        let on = backscatter_modulate(&incident, &BackscatterSymbol::message(&[1.0, 1.0], 1), &cfg).unwrap();
        for k in 0..2 {
            for n in 0..80 {
                let expect = if n < 40 { incident[k * 80 + n] } else { c(0.0, 0.0) };
                assert_eq!(on[k * 80 + n], expect);
            }
        }
    }

    #[test]
    fn message_longer_than_frame_is_a_length_error() {
        let cfg = OfdmConfig::default();
        let incident = vec![c(1.0, 0.0); 80];
        let msg = BackscatterSymbol::message(&[0.5, 0.5], 1);
        assert!(matches!(backscatter_modulate(&incident, &msg, &cfg), Err(Error::Length(_))));
    }

    #[test]
    fn partial_symbol_is_a_length_error() {
        let cfg = OfdmConfig::default();
        assert!(matches!(cp_subtract(&vec![c(0.0, 0.0); 81], &cfg), Err(Error::Length(_))));
    }

    #[test]
    fn harvested_power_basics() {
        assert_eq!(harvested_power(&[c(0.0, 0.0); 4], 0.7).unwrap().value_w, 0.0);
        let unit: Vec<Complex64> = (0..8).map(|n| Complex64::from_polar(1.0, n as f64)).collect();
        assert_relative_eq!(harvested_power(&unit, 0.5).unwrap().value_w, 0.5, max_relative = 1e-12);
        assert!(matches!(harvested_power(&[], 0.7), Err(Error::Measurement(_))));
    }

    #[test]
    fn iq_dump_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("frame.iq");
        let samples = vec![c(0.5, -0.25), c(1.0, 2.0)];
        write_iq_f32le(&path, &samples).unwrap();
        assert_eq!(std::fs::read(&path).unwrap().len(), 16);
        assert_eq!(read_iq_f32le(&path).unwrap(), samples);
    }

    #[test]
    fn offset_beyond_tolerance_is_rejected() {
        let cfg = OfdmConfig::default();
        let incident = vec![c(1.0, 0.0); 80];
        let msg = BackscatterSymbol::message(&[0.5], 1);
        assert!(backscatter_modulate_with_offset(&incident, &msg, &cfg, 15).is_ok());
        assert!(backscatter_modulate_with_offset(&incident, &msg, &cfg, -16).is_err());
    }
}
