//! Channel models for the backscatter links.
//!
//! Every link (RF source to device, device to device, device to attacker) is a
//! [`FadingProcess`]: a sparse tap vector whose taps are circularly symmetric
//! complex Gaussian, scaled by a deterministic large-scale gain
//! `10^-2 * d^-exponent` and by the tap amplitudes of a [`MultipathProfile`].
//! Taps evolve in time as a first-order Gauss-Markov process whose one-step
//! correlation is the Clarke/Jakes autocorrelation `J0(2 pi f_d dt)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT_MPS: f64 = 2.997_924_58e8;
pub const DEFAULT_CARRIER_HZ: f64 = 9.0e8;
pub const DEFAULT_PATH_LOSS_EXPONENT: f64 = 2.0;
pub const DEFAULT_NOISE_DBM: f64 = -30.0;

/// Large-scale gain at one meter.
const REFERENCE_GAIN: f64 = 1.0e-2;

/// Converts a power in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Geometry of one radio link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    pub distance_m: f64,
    pub path_loss_exponent: f64,
    pub relative_speed_mps: f64,
    pub carrier_hz: f64,
}

impl LinkGeometry {
    /// A static link at the default 900 MHz carrier.
    pub fn new(distance_m: f64) -> Result<Self> {
        let geometry = LinkGeometry {
            distance_m,
            path_loss_exponent: DEFAULT_PATH_LOSS_EXPONENT,
            relative_speed_mps: 0.0,
            carrier_hz: DEFAULT_CARRIER_HZ,
        };
        geometry.validate()?;
        Ok(geometry)
    }

    pub fn with_speed(mut self, relative_speed_mps: f64) -> Result<Self> {
        self.relative_speed_mps = relative_speed_mps;
        self.validate()?;
        Ok(self)
    }

    pub fn with_carrier(mut self, carrier_hz: f64) -> Result<Self> {
        self.carrier_hz = carrier_hz;
        self.validate()?;
        Ok(self)
    }

    pub fn with_path_loss_exponent(mut self, exponent: f64) -> Result<Self> {
        self.path_loss_exponent = exponent;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.distance_m > 0.0 && self.distance_m.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "distance must be positive, got {}",
                self.distance_m
            )));
        }
        if !(self.relative_speed_mps >= 0.0 && self.relative_speed_mps.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "relative speed must be nonnegative, got {}",
                self.relative_speed_mps
            )));
        }
        if !(self.carrier_hz > 0.0 && self.carrier_hz.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "carrier frequency must be positive, got {}",
                self.carrier_hz
            )));
        }
        if !self.path_loss_exponent.is_finite() {
            return Err(Error::InvalidGeometry("path loss exponent must be finite".into()));
        }
        Ok(())
    }

    /// Maximum Doppler shift `v * f_c / c`.
    pub fn doppler_hz(&self) -> f64 {
        self.relative_speed_mps * self.carrier_hz / SPEED_OF_LIGHT_MPS
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT_MPS / self.carrier_hz
    }
}

/// Amplitude gain `10^-2 * d^-exponent` of the large-scale path.
///
/// With the default exponent of 2 this is `10^-2 d^-2`.
pub fn path_loss_gain(geometry: &LinkGeometry) -> Result<f64> {
    geometry.validate()?;
    Ok(REFERENCE_GAIN * geometry.distance_m.powf(-geometry.path_loss_exponent))
}

/// Clarke/Jakes coherence time `0.423 / f_d`; infinite for a static link.
pub fn coherence_time_s(geometry: &LinkGeometry) -> f64 {
    let doppler = geometry.doppler_hz();
    if doppler == 0.0 {
        f64::INFINITY
    } else {
        0.423 / doppler
    }
}

/// Bessel function of the first kind, order zero.
///
/// Evaluates `J0(x) = 1/(2 pi) * integral_0^{2 pi} cos(x sin t) dt` with the
/// trapezoidal rule, which converges geometrically for this periodic integrand
/// once the node count exceeds `|x|`.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    let nodes = (2.0 * x) as usize + 64;
    let step = 2.0 * PI / nodes as f64;
    let sum: f64 = (0..nodes).map(|m| (x * (m as f64 * step).sin()).cos()).sum();
    sum / nodes as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseMode {
    /// Every drop draws fresh uniform tap phases.
    RandomPerDrop,
}

/// Named tap profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Flat,
    Rural,
    Urban,
}

impl ProfileKind {
    pub fn profile(self) -> MultipathProfile {
        match self {
            ProfileKind::Flat => MultipathProfile::flat(),
            ProfileKind::Rural => MultipathProfile::rural(),
            ProfileKind::Urban => MultipathProfile::urban(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ProfileKind::Flat => "flat",
            ProfileKind::Rural => "rural",
            ProfileKind::Urban => "urban",
        }
    }
}

impl std::str::FromStr for ProfileKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flat" => Ok(ProfileKind::Flat),
            "rural" => Ok(ProfileKind::Rural),
            "urban" => Ok(ProfileKind::Urban),
            other => Err(Error::Config(format!("unknown multipath profile `{other}`"))),
        }
    }
}

/// Sparse power-delay profile with fixed tap amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct MultipathProfile {
    pub tap_delays_samples: Vec<usize>,
    pub tap_amplitudes: Vec<f64>,
    pub phase_mode: PhaseMode,
}

impl MultipathProfile {
    pub fn new(tap_delays_samples: Vec<usize>, tap_amplitudes: Vec<f64>) -> Result<Self> {
        if tap_delays_samples.is_empty() || tap_delays_samples.len() != tap_amplitudes.len() {
            return Err(Error::Config(
                "multipath profile needs one amplitude per delay and at least one tap".into(),
            ));
        }
        if tap_amplitudes.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::Config("tap amplitudes must be positive".into()));
        }
        Ok(MultipathProfile {
            tap_delays_samples,
            tap_amplitudes,
            phase_mode: PhaseMode::RandomPerDrop,
        })
    }

    pub fn flat() -> Self {
        MultipathProfile {
            tap_delays_samples: vec![0],
            tap_amplitudes: vec![1.0],
            phase_mode: PhaseMode::RandomPerDrop,
        }
    }

    /// Four taps at delays 0..=3.
    pub fn rural() -> Self {
        Self::ladder((0..4).collect())
    }

    /// Twelve taps on the typical-urban delay grid (0 to 5 us) sampled at
    /// 1 MHz, so that a two-hop reflected path still fits a 16-sample prefix.
    pub fn urban() -> Self {
        Self::ladder(vec![0, 0, 0, 1, 1, 1, 1, 2, 2, 3, 3, 5])
    }

    /// One tap per delay with powers falling 2 dB per tap, normalized to
    /// unit total power.
    fn ladder(delays: Vec<usize>) -> Self {
        let powers: Vec<f64> = (0..delays.len()).map(|k| db_to_linear(-2.0 * k as f64)).collect();
        let total: f64 = powers.iter().sum();
        MultipathProfile {
            tap_delays_samples: delays,
            tap_amplitudes: powers.iter().map(|p| (p / total).sqrt()).collect(),
            phase_mode: PhaseMode::RandomPerDrop,
        }
    }

    pub fn max_delay(&self) -> usize {
        self.tap_delays_samples.iter().copied().max().unwrap_or(0)
    }

    /// Delay spread of a reflected path whose two hops both follow this
    /// profile.
    pub fn cascade_spread(&self) -> usize {
        2 * self.max_delay()
    }

    pub fn total_power(&self) -> f64 {
        self.tap_amplitudes.iter().map(|a| a * a).sum()
    }

    pub fn len(&self) -> usize {
        self.tap_delays_samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tap_delays_samples.is_empty()
    }
}

/// One channel tap: a complex gain at an integer sample delay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    pub delay: usize,
    pub gain: Complex64,
}

impl Tap {
    pub fn new(delay: usize, gain: Complex64) -> Self {
        Tap { delay, gain }
    }
}

/// Draws one circularly symmetric complex Gaussian sample with total variance `variance`.
pub fn cscg<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let scale = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * scale, im * scale)
}

/// Time-correlated Rayleigh fading on one link.
#[derive(Debug, Clone)]
pub struct FadingProcess {
    geometry: LinkGeometry,
    profile: MultipathProfile,
    large_scale_gain: f64,
    current_taps: Vec<Complex64>,
    rng: ChaCha8Rng,
}

impl FadingProcess {
    /// Draws a fresh channel realization from a dedicated seeded stream.
    pub fn new(geometry: LinkGeometry, profile: MultipathProfile, seed: u64) -> Result<Self> {
        let large_scale_gain = path_loss_gain(&geometry)?;
        if profile.is_empty() {
            return Err(Error::Config("empty multipath profile".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let current_taps = profile
            .tap_amplitudes
            .iter()
            .map(|a| cscg(&mut rng, (large_scale_gain * a).powi(2)))
            .collect();
        Ok(FadingProcess {
            geometry,
            profile,
            large_scale_gain,
            current_taps,
            rng,
        })
    }

    pub fn geometry(&self) -> &LinkGeometry {
        &self.geometry
    }

    pub fn profile(&self) -> &MultipathProfile {
        &self.profile
    }

    pub fn current_taps(&self) -> &[Complex64] {
        &self.current_taps
    }

    /// Current taps paired with their delays.
    pub fn taps(&self) -> Vec<Tap> {
        self.profile
            .tap_delays_samples
            .iter()
            .zip(&self.current_taps)
            .map(|(&delay, &gain)| Tap::new(delay, gain))
            .collect()
    }

    pub fn large_scale_gain(&self) -> f64 {
        self.large_scale_gain
    }

    /// Expected total tap power `E[sum |h_k|^2]`.
    pub fn mean_power(&self) -> f64 {
        self.large_scale_gain.powi(2) * self.profile.total_power()
    }

    /// Realized total tap power of the current state.
    pub fn instantaneous_power(&self) -> f64 {
        self.current_taps.iter().map(|h| h.norm_sqr()).sum()
    }

    /// One-step correlation used by [`FadingProcess::evolve`].
    pub fn correlation(&self, delta_t_s: f64) -> f64 {
        bessel_j0(2.0 * PI * self.geometry.doppler_hz() * delta_t_s)
    }

    /// Advances every tap by a Gauss-Markov step matched to `J0(2 pi f_d dt)`.
    pub fn evolve(&mut self, delta_t_s: f64) {
        debug_assert!(delta_t_s >= 0.0);
        if delta_t_s <= 0.0 || self.geometry.doppler_hz() == 0.0 {
            return;
        }
        let rho = self.correlation(delta_t_s);
        let innovation = (1.0 - rho * rho).max(0.0).sqrt();
        for (tap, amp) in self.current_taps.iter_mut().zip(&self.profile.tap_amplitudes) {
            let fresh = cscg(&mut self.rng, (self.large_scale_gain * amp).powi(2));
            *tap = *tap * rho + fresh * innovation;
        }
    }

    /// Consuming form of [`FadingProcess::evolve`].
    pub fn evolved(mut self, delta_t_s: f64) -> Self {
        self.evolve(delta_t_s);
        self
    }
}

/// Receiver noise floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub noise_power_dbm: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            noise_power_dbm: DEFAULT_NOISE_DBM,
        }
    }
}

impl NoiseModel {
    pub fn new(noise_power_dbm: f64) -> Self {
        NoiseModel { noise_power_dbm }
    }

    /// Linear variance in watts.
    pub fn variance_w(&self) -> f64 {
        dbm_to_watts(self.noise_power_dbm)
    }
}

/// I.i.d. complex Gaussian noise with the model's variance.
pub fn awgn<R: Rng + ?Sized>(noise: &NoiseModel, n_samples: usize, rng: &mut R) -> Vec<Complex64> {
    awgn_with_variance(noise.variance_w(), n_samples, rng)
}

pub fn awgn_with_variance<R: Rng + ?Sized>(
    variance: f64,
    n_samples: usize,
    rng: &mut R,
) -> Vec<Complex64> {
    (0..n_samples).map(|_| cscg(rng, variance)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn path_loss_matches_reference_law() {
        let g1 = path_loss_gain(&LinkGeometry::new(1.0).unwrap()).unwrap();
        let g10 = path_loss_gain(&LinkGeometry::new(10.0).unwrap()).unwrap();
        let g3 = path_loss_gain(&LinkGeometry::new(3.0).unwrap()).unwrap();
        assert_relative_eq!(g1, 1.0e-2, max_relative = 1e-12);
        assert_relative_eq!(g10, 1.0e-4, max_relative = 1e-12);
        assert_relative_eq!(g3, 1.0e-2 / 9.0, max_relative = 1e-12);
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(matches!(LinkGeometry::new(0.0), Err(Error::InvalidGeometry(_))));
        assert!(matches!(LinkGeometry::new(-2.0), Err(Error::InvalidGeometry(_))));
        let g = LinkGeometry::new(1.0).unwrap();
        assert!(g.with_speed(-1.0).is_err());
        let mut bad = g;
        bad.distance_m = -1.0;
        assert!(path_loss_gain(&bad).is_err());
    }

    #[test]
    fn coherence_time_values() {
        let still = LinkGeometry::new(3.0).unwrap();
        assert!(coherence_time_s(&still).is_infinite());

        let fast = still.with_speed(30.0).unwrap();
        assert_relative_eq!(fast.doppler_hz(), 90.0655, max_relative = 1e-4);
        assert_relative_eq!(coherence_time_s(&fast), 4.697e-3, max_relative = 1e-3);

        let slow = still.with_speed(1.0).unwrap();
        assert_relative_eq!(coherence_time_s(&slow), 0.1409, max_relative = 1e-3);
    }

    #[test]
    fn profiles_have_expected_shape() {
        let rural = MultipathProfile::rural();
        let urban = MultipathProfile::urban();
        assert_eq!(rural.len(), 4);
        assert_eq!(urban.len(), 12);
        assert!(rural.cascade_spread() < 16 && urban.cascade_spread() < 16);
        assert_relative_eq!(rural.total_power(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(urban.total_power(), 1.0, max_relative = 1e-12);
        let ratio = (urban.tap_amplitudes[1] / urban.tap_amplitudes[0]).powi(2);
        assert_relative_eq!(ratio, db_to_linear(-2.0), max_relative = 1e-12);
        let flat = MultipathProfile::flat();
        assert_eq!(flat.tap_delays_samples, vec![0]);
        assert_eq!(flat.tap_amplitudes, vec![1.0]);
    }

    #[test]
    fn zero_step_and_static_links_do_not_move() {
        let g = LinkGeometry::new(3.0).unwrap().with_speed(30.0).unwrap();
        let mut p = FadingProcess::new(g, MultipathProfile::rural(), 7).unwrap();
        let before = p.current_taps().to_vec();
        p.evolve(0.0);
        assert_eq!(before, p.current_taps());

        let still = LinkGeometry::new(3.0).unwrap();
        let mut q = FadingProcess::new(still, MultipathProfile::flat(), 7).unwrap();
        let before = q.current_taps().to_vec();
        q.evolve(1.0);
        assert_eq!(before, q.current_taps());
    }

    #[test]
    fn noise_variance_from_dbm() {
        assert_relative_eq!(NoiseModel::default().variance_w(), 1e-6, max_relative = 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(awgn(&NoiseModel::default(), 0, &mut rng).is_empty());
    }

    #[test]
    fn j0_known_values() {
        assert_relative_eq!(bessel_j0(0.0), 1.0, epsilon = 1e-15);
        assert_relative_eq!(bessel_j0(2.404_825_557_695_773), 0.0, epsilon = 1e-13);
        assert_relative_eq!(bessel_j0(1.0), 0.765_197_686_557_966_6, epsilon = 1e-14);
        assert_relative_eq!(bessel_j0(-5.0), -0.177_596_771_314_338_3, epsilon = 1e-14);
    }
}
