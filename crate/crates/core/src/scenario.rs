//! A drop of the physical environment: one RF source, two legitimate devices
//! and an optional eavesdropper, with every link's fading process and a shared
//! clock.
//!
//! Transmissions happen in stages of two equal-length fields (random number
//! then key). During a stage the source content is one OFDM frame repeated
//! for both fields, so the ambient power seen by the two fields is the same
//! and cancels in any same-stage power ratio. Channels evolve lazily with the
//! clock.

use std::collections::hash_map::Entry;
use std::collections::HashMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{
    db_to_linear, dbm_to_watts, path_loss_gain, FadingProcess, LinkGeometry, ProfileKind, Tap,
    DEFAULT_CARRIER_HZ, DEFAULT_PATH_LOSS_EXPONENT,
};
use crate::error::{Error, Result};
use crate::phy::{
    bd_symbol_readings, cp_subtract, gen_ofdm_frame, receive, reflect, BackscatterSymbol,
    BasebandFrame, HarvestedPowerReading, OfdmConfig, DEFAULT_EFFICIENCY,
};

/// Lower bound of a noise-compensated reading, relative to the subtracted
/// floor, so that a reading swamped by noise stays positive.
const MIN_COMPENSATED_FRACTION: f64 = 1e-3;

/// The three radios of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Station {
    Alice,
    Bob,
    Eve,
}

impl Station {
    fn index(self) -> usize {
        match self {
            Station::Alice => 0,
            Station::Bob => 1,
            Station::Eve => 2,
        }
    }

    /// The other legitimate device.
    pub fn peer(self) -> Station {
        match self {
            Station::Alice => Station::Bob,
            Station::Bob => Station::Alice,
            Station::Eve => Station::Eve,
        }
    }
}

/// How receiver noise is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PowerMode {
    Noiseless,
    /// Noise variance is set per transmitter/receiver pair so that the
    /// realized reflected power at full reflection sits `snr_db` above it.
    MeasuredSnr { snr_db: f64 },
    /// Absolute source power and noise floor.
    FixedTx { tx_power_dbm: f64, noise_dbm: f64 },
}

/// Source content across the two fields of a stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmbientMode {
    /// One frame repeated for both fields.
    RepeatedPerStage,
    /// Independent frames per field.
    Fresh,
}

/// Placement of the two fields of a stage on air.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldLayout {
    /// All of the first field, then all of the second.
    Sequential,
    /// OFDM symbols of the two fields alternate, so the readings that form a
    /// ratio are one OFDM symbol apart in time whatever the span.
    Interleaved,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EveConfig {
    /// Device the eavesdropper sits next to.
    pub victim: Station,
    pub distance_m: f64,
}

impl EveConfig {
    /// Within half a carrier wavelength of the victim.
    pub fn is_near(&self, carrier_hz: f64) -> bool {
        self.distance_m < half_wavelength_m(carrier_hz)
    }
}

pub fn half_wavelength_m(carrier_hz: f64) -> f64 {
    crate::channel::SPEED_OF_LIGHT_MPS / carrier_hz / 2.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub ofdm: OfdmConfig,
    /// OFDM symbols per device symbol.
    pub span: usize,
    pub efficiency: f64,
    pub carrier_hz: f64,
    pub path_loss_exponent: f64,
    pub source_to_alice_m: f64,
    pub source_to_bob_m: f64,
    pub device_distance_m: f64,
    pub relative_speed_mps: f64,
    pub profile: ProfileKind,
    pub power: PowerMode,
    pub ambient: AmbientMode,
    pub timing_offset: isize,
    /// Gap between the challenge and the response stage. `None` means one
    /// field duration.
    pub response_delay_s: Option<f64>,
    pub eve: Option<EveConfig>,
    pub layout: FieldLayout,
    /// Legitimate receivers subtract their known noise contribution
    /// `2 * eta * sigma^2` from every reading.
    pub noise_floor_compensation: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            ofdm: OfdmConfig::default(),
            span: 2,
            efficiency: DEFAULT_EFFICIENCY,
            carrier_hz: DEFAULT_CARRIER_HZ,
            path_loss_exponent: DEFAULT_PATH_LOSS_EXPONENT,
            source_to_alice_m: 3.0,
            source_to_bob_m: 3.0,
            device_distance_m: 3.0,
            relative_speed_mps: 0.0,
            profile: ProfileKind::Flat,
            power: PowerMode::MeasuredSnr { snr_db: 20.0 },
            ambient: AmbientMode::RepeatedPerStage,
            timing_offset: 0,
            response_delay_s: None,
            eve: None,
            layout: FieldLayout::Interleaved,
            noise_floor_compensation: true,
        }
    }
}

impl ScenarioConfig {
    pub fn noiseless() -> Self {
        ScenarioConfig {
            power: PowerMode::Noiseless,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.effective_ofdm().validate()?;
        if self.span == 0 {
            return Err(Error::Config("span must be at least one OFDM symbol".into()));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::Config("harvester efficiency must be in (0, 1]".into()));
        }
        if self.profile.profile().cascade_spread() >= self.ofdm.cp_len {
            return Err(Error::Config(format!(
                "{} profile two-hop delay spread does not fit the cyclic prefix",
                self.profile.name()
            )));
        }
        if self.timing_offset.unsigned_abs() > self.ofdm.max_timing_offset() {
            return Err(Error::Config("timing offset outside the tolerated window".into()));
        }
        for d in [self.source_to_alice_m, self.source_to_bob_m, self.device_distance_m] {
            LinkGeometry::new(d)?;
        }
        if let Some(eve) = &self.eve {
            LinkGeometry::new(eve.distance_m)?;
            if eve.victim == Station::Eve {
                return Err(Error::Config("eavesdropper cannot be its own victim".into()));
            }
        }
        Ok(())
    }

    /// OFDM settings with the prefix guard covering the profile's delay spread
    /// and the source power of a fixed-power run.
    pub fn effective_ofdm(&self) -> OfdmConfig {
        let mut ofdm = self.ofdm;
        ofdm.cp_guard = ofdm.cp_guard.max(self.profile.profile().cascade_spread());
        if let PowerMode::FixedTx { tx_power_dbm, .. } = self.power {
            ofdm.tx_power_dbm = tx_power_dbm;
        }
        ofdm
    }

    /// Air time of one field of `len` device symbols. A stage takes twice
    /// this.
    pub fn field_duration_s(&self, len: usize) -> f64 {
        (len * self.span) as f64 * self.ofdm.symbol_duration_s()
    }

    fn geometry(&self, distance_m: f64, speed: f64) -> Result<LinkGeometry> {
        LinkGeometry::new(distance_m)?
            .with_carrier(self.carrier_hz)?
            .with_path_loss_exponent(self.path_loss_exponent)?
            .with_speed(speed)
    }

    fn source_distance(&self, station: Station) -> f64 {
        match station {
            Station::Alice => self.source_to_alice_m,
            Station::Bob => self.source_to_bob_m,
            Station::Eve => self
                .eve
                .map(|e| self.source_distance(e.victim))
                .unwrap_or(self.source_to_alice_m),
        }
    }
}

/// Source power that puts the mean full-reflection SNR of the device-to-device
/// link at `snr_db` when the devices are `reference_distance_m` apart.
pub fn tx_power_for_mean_snr(config: &ScenarioConfig, snr_db: f64, noise_dbm: f64, reference_distance_m: f64) -> Result<f64> {
    let down = path_loss_gain(&config.geometry(config.source_to_alice_m, 0.0)?)?;
    let inward = path_loss_gain(&config.geometry(reference_distance_m, 0.0)?)?;
    let watts = db_to_linear(snr_db) * dbm_to_watts(noise_dbm) / (down * down * inward * inward);
    Ok(crate::channel::watts_to_dbm(watts))
}

#[derive(Debug, Clone)]
enum LinkState {
    Fading { process: FadingProcess, last_time_s: f64 },
    Fixed(Vec<Tap>),
}

impl LinkState {
    fn taps_at(&mut self, time_s: f64) -> Vec<Tap> {
        match self {
            LinkState::Fading {
                process,
                last_time_s,
            } => {
                let dt = time_s - *last_time_s;
                debug_assert!(dt >= -1e-15, "links are sampled forward in time");
                if dt > 0.0 {
                    process.evolve(dt);
                    *last_time_s = time_s;
                }
                process.taps()
            }
            LinkState::Fixed(taps) => taps.clone(),
        }
    }

    fn taps_now(&self) -> Vec<Tap> {
        match self {
            LinkState::Fading { process, .. } => process.taps(),
            LinkState::Fixed(taps) => taps.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum LinkId {
    Down(usize),
    Between(usize, usize),
}

/// What one station captured of one field.
#[derive(Debug, Clone)]
pub struct FieldCapture {
    pub received: Vec<Complex64>,
    pub readings: Vec<HarvestedPowerReading>,
    pub noise_variance_w: f64,
}

/// One two-field stage as seen by every listening station.
#[derive(Debug, Clone)]
pub struct StageCapture {
    pub transmitter: Station,
    pub start_time_s: f64,
    /// Source frames used by the two fields (one shared frame when the
    /// ambient is repeated per stage).
    pub ambient: Vec<BasebandFrame>,
    pub observers: Vec<(Station, [FieldCapture; 2])>,
}

impl StageCapture {
    pub fn fields(&self, station: Station) -> Option<&[FieldCapture; 2]> {
        self.observers
            .iter()
            .find(|(s, _)| *s == station)
            .map(|(_, f)| f)
    }

    pub fn readings(&self, station: Station, field: usize) -> Option<&[HarvestedPowerReading]> {
        self.fields(station).map(|f| f[field].readings.as_slice())
    }

    pub fn ambient_for_field(&self, field: usize) -> &BasebandFrame {
        &self.ambient[field.min(self.ambient.len() - 1)]
    }
}

/// Live environment for one or more authentication sessions.
#[derive(Debug, Clone)]
pub struct Scenario {
    config: ScenarioConfig,
    ofdm: OfdmConfig,
    links: HashMap<LinkId, LinkState>,
    noise: HashMap<(Station, Station), f64>,
    clock_s: f64,
    rng: ChaCha8Rng,
    eve_log: Vec<StageCapture>,
}

impl Scenario {
    pub fn new(config: ScenarioConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ofdm = config.effective_ofdm();
        let profile = config.profile.profile();
        let mut links = HashMap::new();

        let fading = |distance: f64, speed: f64, profile: &crate::channel::MultipathProfile, rng: &mut ChaCha8Rng| -> Result<LinkState> {
            let geometry = config.geometry(distance, speed)?;
            Ok(LinkState::Fading {
                process: FadingProcess::new(geometry, profile.clone(), rng.random())?,
                last_time_s: 0.0,
            })
        };

        for station in [Station::Alice, Station::Bob] {
            let state = fading(config.source_distance(station), 0.0, &profile, &mut rng)?;
            links.insert(LinkId::Down(station.index()), state);
        }
        let ab = fading(config.device_distance_m, config.relative_speed_mps, &profile, &mut rng)?;
        links.insert(LinkId::Between(0, 1), ab);

        if let Some(eve) = config.eve {
            let near = eve.is_near(config.carrier_hz);
            if !near {
                let state = fading(config.source_distance(Station::Eve), 0.0, &profile, &mut rng)?;
                links.insert(LinkId::Down(Station::Eve.index()), state);
            }
            let victim_link = if near {
                // near field: deterministic coupling, capped at unit gain
                let gain = path_loss_gain(&config.geometry(eve.distance_m, 0.0)?)?.min(1.0);
                let phase = rng.random::<f64>() * std::f64::consts::TAU;
                LinkState::Fixed(vec![Tap::new(0, Complex64::from_polar(gain, phase))])
            } else {
                fading(eve.distance_m, 0.0, &profile, &mut rng)?
            };
            links.insert(Self::between_id(eve.victim, Station::Eve), victim_link);
            let other = fading(config.device_distance_m, config.relative_speed_mps, &profile, &mut rng)?;
            links.insert(Self::between_id(eve.victim.peer(), Station::Eve), other);
        }

        Ok(Scenario {
            config,
            ofdm,
            links,
            noise: HashMap::new(),
            clock_s: 0.0,
            rng,
            eve_log: Vec::new(),
        })
    }

    fn between_id(a: Station, b: Station) -> LinkId {
        let (x, y) = (a.index(), b.index());
        LinkId::Between(x.min(y), x.max(y))
    }

    fn down_id(&self, station: Station) -> LinkId {
        if station == Station::Eve {
            if let Some(eve) = self.config.eve {
                if eve.is_near(self.config.carrier_hz) {
                    return LinkId::Down(eve.victim.index());
                }
            }
        }
        LinkId::Down(station.index())
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    /// OFDM settings actually used on air.
    pub fn ofdm(&self) -> &OfdmConfig {
        &self.ofdm
    }

    pub fn now_s(&self) -> f64 {
        self.clock_s
    }

    pub fn advance(&mut self, delta_t_s: f64) {
        self.clock_s += delta_t_s.max(0.0);
    }

    /// Waits out the configured challenge-to-response gap.
    pub fn advance_response_delay(&mut self, field_len: usize) {
        let gap = self
            .config
            .response_delay_s
            .unwrap_or_else(|| self.config.field_duration_s(field_len));
        self.advance(gap);
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn has_station(&self, station: Station) -> bool {
        station != Station::Eve || self.config.eve.is_some()
    }

    /// Stages the eavesdropper overheard, in order.
    pub fn eve_log(&self) -> &[StageCapture] {
        &self.eve_log
    }

    /// Current taps of the link between two stations (or from the source when
    /// `from` is `None`).
    pub fn link_taps(&self, from: Option<Station>, to: Station) -> Result<Vec<Tap>> {
        let id = match from {
            None => self.down_id(to),
            Some(a) => Self::between_id(a, to),
        };
        self.links
            .get(&id)
            .map(LinkState::taps_now)
            .ok_or_else(|| Error::Config(format!("no link {from:?} -> {to:?} in this scenario")))
    }

    fn noise_variance(&mut self, tx: Station, rx: Station) -> Result<f64> {
        let mode = self.config.power;
        match mode {
            PowerMode::Noiseless => Ok(0.0),
            PowerMode::FixedTx { noise_dbm, .. } => Ok(dbm_to_watts(noise_dbm)),
            PowerMode::MeasuredSnr { snr_db } => {
                if let Some(v) = self.noise.get(&(tx, rx)) {
                    return Ok(*v);
                }
                let down = self.link_taps(None, tx)?;
                let inward = self.link_taps(Some(tx), rx)?;
                let energy = cascade_energy(&down, &inward);
                let variance = self.ofdm.tx_power_w() * energy / db_to_linear(snr_db);
                self.noise.insert((tx, rx), variance);
                Ok(variance)
            }
        }
    }

    fn schedule(&mut self, id: LinkId, start_s: f64, n_symbols: usize) -> Result<Vec<Vec<Tap>>> {
        let dt = self.ofdm.symbol_duration_s();
        let link = self
            .links
            .get_mut(&id)
            .ok_or_else(|| Error::Config(format!("missing link {id:?}")))?;
        Ok((0..n_symbols)
            .map(|k| link.taps_at(start_s + k as f64 * dt))
            .collect())
    }

    /// Backscatters two equal-length fields from `tx` and returns what each
    /// listening station harvested. The eavesdropper, when present, always
    /// listens and its capture is appended to [`Scenario::eve_log`].
    pub fn send_stage(
        &mut self,
        tx: Station,
        fields: [&[f64]; 2],
        listeners: &[Station],
    ) -> Result<StageCapture> {
        if fields[0].len() != fields[1].len() {
            return Err(Error::Length(format!(
                "stage fields must have equal length, got {} and {}",
                fields[0].len(),
                fields[1].len()
            )));
        }
        if fields[0].is_empty() {
            return Err(Error::Length("empty stage field".into()));
        }
        if !self.has_station(tx) {
            return Err(Error::Config(format!("{tx:?} is not part of this scenario")));
        }
        let mut observers: Vec<Station> = listeners.iter().copied().filter(|s| *s != tx).collect();
        if self.config.eve.is_some() && tx != Station::Eve && !observers.contains(&Station::Eve) {
            observers.push(Station::Eve);
        }
        observers.sort();
        observers.dedup();
        for s in &observers {
            if !self.has_station(*s) {
                return Err(Error::Config(format!("{s:?} is not part of this scenario")));
            }
        }

        let span = self.config.span;
        let per_field = fields[0].len() * span;
        let ofdm = self.ofdm;
        let t0 = self.clock_s;
        let mut ambient = vec![gen_ofdm_frame(&ofdm, per_field, &mut self.rng)?];
        if self.config.ambient == AmbientMode::Fresh {
            ambient.push(gen_ofdm_frame(&ofdm, per_field, &mut self.rng)?);
        }

        // on-air order of (field, OFDM symbol within field)
        let order: Vec<(usize, usize)> = match self.config.layout {
            FieldLayout::Sequential => (0..2)
                .flat_map(|f| (0..per_field).map(move |k| (f, k)))
                .collect(),
            FieldLayout::Interleaved => (0..per_field)
                .flat_map(|k| (0..2).map(move |f| (f, k)))
                .collect(),
        };
        let n_air = order.len();
        let n_t = ofdm.symbol_len();
        let mut air = Vec::with_capacity(n_air * n_t);
        let mut message = Vec::with_capacity(n_air);
        for &(f, k) in &order {
            air.extend_from_slice(ambient[f.min(ambient.len() - 1)].symbol(k));
            message.push(BackscatterSymbol::new(fields[f][k / span], 1));
        }
        let air = BasebandFrame {
            samples: air,
            n_symbols: n_air,
            config: ofdm,
        };

        let tx_down = self.down_id(tx);
        let mut schedules: HashMap<LinkId, Vec<Vec<Tap>>> = HashMap::new();
        schedules.insert(tx_down, self.schedule(tx_down, t0, n_air)?);
        for rx in &observers {
            for id in [Self::between_id(tx, *rx), self.down_id(*rx)] {
                if let Entry::Vacant(slot) = schedules.entry(id) {
                    slot.insert(self.schedule(id, t0, n_air)?);
                }
            }
        }
        let reflected = reflect(&air, &schedules[&tx_down], &message, self.config.timing_offset)?;

        let mut per_observer = Vec::with_capacity(observers.len());
        for rx in observers {
            let noise = self.noise_variance(tx, rx)?;
            let received = receive(
                &reflected,
                &schedules[&Self::between_id(tx, rx)],
                &air,
                &schedules[&self.down_id(rx)],
                noise,
                &mut self.rng,
            );
            let mut split = [Vec::with_capacity(per_field * n_t), Vec::with_capacity(per_field * n_t)];
            for (chunk, &(f, _)) in received.chunks_exact(n_t).zip(&order) {
                split[f].extend_from_slice(chunk);
            }
            let mut captures = Vec::with_capacity(2);
            for received in split {
                let z = cp_subtract(&received, &ofdm)?;
                let mut readings = bd_symbol_readings(&z, &ofdm, span, self.config.efficiency)?;
                if self.config.noise_floor_compensation && rx != Station::Eve && noise > 0.0 {
                    let floor = 2.0 * self.config.efficiency * noise;
                    for r in readings.iter_mut() {
                        r.value_w = (r.value_w - floor).max(MIN_COMPENSATED_FRACTION * floor);
                    }
                }
                captures.push(FieldCapture {
                    received,
                    readings,
                    noise_variance_w: noise,
                });
            }
            let [a, b]: [FieldCapture; 2] = captures.try_into().expect("two fields per stage");
            per_observer.push((rx, [a, b]));
        }
        self.clock_s = t0 + n_air as f64 * ofdm.symbol_duration_s();

        let capture = StageCapture {
            transmitter: tx,
            start_time_s: t0,
            ambient,
            observers: per_observer,
        };
        if self.config.eve.is_some() && tx != Station::Eve {
            self.eve_log.push(capture.clone());
        }
        Ok(capture)
    }
}

/// Total energy of the cascade `inward * down` (convolution of the tap sets).
pub fn cascade_energy(down: &[Tap], inward: &[Tap]) -> f64 {
    let max_delay = down.iter().map(|t| t.delay).max().unwrap_or(0)
        + inward.iter().map(|t| t.delay).max().unwrap_or(0);
    let mut cascade = vec![Complex64::new(0.0, 0.0); max_delay + 1];
    for a in down {
        for b in inward {
            cascade[a.delay + b.delay] += a.gain * b.gain;
        }
    }
    cascade.iter().map(|c| c.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_fields_must_match() {
        let mut s = Scenario::new(ScenarioConfig::noiseless(), 1).unwrap();
        let err = s.send_stage(Station::Alice, [&[0.5, 0.5], &[0.5]], &[Station::Bob]);
        assert!(matches!(err, Err(Error::Length(_))));
    }

    #[test]
    fn clock_advances_by_field_airtime() {
        let mut s = Scenario::new(ScenarioConfig::noiseless(), 1).unwrap();
        let d = [0.5; 10];
        s.send_stage(Station::Alice, [&d, &d], &[Station::Bob]).unwrap();
        // two fields of ten symbols, two OFDM symbols each
        assert!((s.now_s() - 2.0 * 10.0 * 2.0 * 80e-6).abs() < 1e-12);
    }

    #[test]
    fn eve_requires_configuration() {
        let mut s = Scenario::new(ScenarioConfig::noiseless(), 1).unwrap();
        let d = [0.5; 5];
        assert!(s.send_stage(Station::Alice, [&d, &d], &[Station::Eve]).is_err());
        assert!(s.eve_log().is_empty());
    }

    #[test]
    fn measured_snr_sets_noise_from_realized_link() {
        let cfg = ScenarioConfig {
            power: PowerMode::MeasuredSnr { snr_db: 10.0 },
            ..Default::default()
        };
        let mut s = Scenario::new(cfg, 4).unwrap();
        let down = s.link_taps(None, Station::Alice).unwrap();
        let inward = s.link_taps(Some(Station::Alice), Station::Bob).unwrap();
        let expect = s.ofdm().tx_power_w() * cascade_energy(&down, &inward) / 10.0;
        let got = s.noise_variance(Station::Alice, Station::Bob).unwrap();
        assert!((got / expect - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tx_power_for_reference_snr() {
        let cfg = ScenarioConfig::default();
        let dbm = tx_power_for_mean_snr(&cfg, 10.0, -30.0, 1.0).unwrap();
        // 10 * 1e-6 W / ((1e-2/9)^2 * (1e-2)^2)
        let expect = 10.0 * 1e-6 / ((1e-2f64 / 9.0).powi(2) * 1e-4);
        assert!((dbm_to_watts(dbm) / expect - 1.0).abs() < 1e-9);
    }
}
