//! Experiment configuration: a flat TOML key/value file.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adversary::{AttackKind, AttackerConfig};
use crate::baselines::BaselineCostModel;
use crate::channel::ProfileKind;
use crate::error::{Error, Result};
use crate::phy::OfdmConfig;
use crate::protocol::{MAX_KEY_LEN, MIN_KEY_LEN};
use crate::scenario::{
    tx_power_for_mean_snr, AmbientMode, EveConfig, FieldLayout, PowerMode, ScenarioConfig, Station,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuthMode {
    OneWay,
    Mutual,
}

impl AuthMode {
    pub fn name(self) -> &'static str {
        match self {
            AuthMode::OneWay => "one_way",
            AuthMode::Mutual => "mutual",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerModeKind {
    /// Noise set per link from the realized full-reflection power.
    MeasuredSnr,
    /// Source power chosen once so the mean SNR at `ref_distance_m` is
    /// `snr_db`, then held fixed.
    ReferenceSnr,
    /// Literal `tx_power_dbm` and `noise_dbm`.
    FixedTx,
    Noiseless,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutKind {
    Interleaved,
    Sequential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmbientKind {
    Repeated,
    Fresh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    None,
    #[serde(alias = "keylength")]
    KeyLength,
    Snr,
    Distance,
    Speed,
    Profile,
    Attack,
    AttackerDistance,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::None => "none",
            SweepAxis::KeyLength => "key_length",
            SweepAxis::Snr => "snr",
            SweepAxis::Distance => "distance",
            SweepAxis::Speed => "speed",
            SweepAxis::Profile => "profile",
            SweepAxis::Attack => "attack",
            SweepAxis::AttackerDistance => "attacker_distance",
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let all = [
            SweepAxis::None,
            SweepAxis::KeyLength,
            SweepAxis::Snr,
            SweepAxis::Distance,
            SweepAxis::Speed,
            SweepAxis::Profile,
            SweepAxis::Attack,
            SweepAxis::AttackerDistance,
        ];
        // the config key for key length is spelled without the underscore
        let s = if s == "keylength" { "key_length" } else { s };
        all.into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown sweep axis `{s}`")))
    }
}

/// One sweep coordinate: numeric for most axes, a name for profile/attack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepValue {
    Number(f64),
    Name(String),
}

impl SweepValue {
    pub fn label(&self) -> String {
        match self {
            SweepValue::Number(x) => format!("{x}"),
            SweepValue::Name(s) => s.clone(),
        }
    }

    fn number(&self, axis: SweepAxis) -> Result<f64> {
        match self {
            SweepValue::Number(x) => Ok(*x),
            SweepValue::Name(s) => s
                .parse()
                .map_err(|_| Error::Config(format!("{} sweep needs numbers, got `{s}`", axis.name()))),
        }
    }

    fn name(&self) -> String {
        self.label()
    }

    /// Parses a command-line value: a number when it looks like one.
    pub fn parse(s: &str) -> SweepValue {
        s.parse::<f64>()
            .map(SweepValue::Number)
            .unwrap_or_else(|_| SweepValue::Name(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub fc_hz: f64,
    pub noise_dbm: f64,
    pub tx_power_dbm: f64,
    /// Source to each device.
    pub d_rfs_m: f64,
    /// Between the two devices.
    pub d_ij_m: f64,
    /// Attacker to its victim.
    pub d_a_m: f64,
    pub v_ij_mps: f64,
    pub keylength: usize,
    pub n_auth: usize,
    pub n_fft: usize,
    pub n_cp: usize,
    pub sample_rate_hz: f64,
    /// OFDM symbols per device symbol.
    pub span: usize,
    pub efficiency: f64,
    pub profile: ProfileKind,
    pub power_mode: PowerModeKind,
    pub snr_db: f64,
    pub ref_distance_m: f64,
    pub auth: AuthMode,
    pub attack: AttackKind,
    pub key_update: bool,
    /// Replay trials reuse the recorded session's random vector.
    pub reuse_random: bool,
    pub identification: bool,
    pub n_devices: usize,
    pub sweep: SweepAxis,
    pub sweep_values: Vec<SweepValue>,
    pub seed: u64,
    pub out: String,
    pub li_bins: usize,
    pub fpr_limits: Vec<f64>,
    pub target_fpr: f64,
    /// Fixed threshold; calibrated from the attacker population when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    pub timing_offset: i64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub response_delay_s: Option<f64>,
    pub layout: LayoutKind,
    pub ambient: AmbientKind,
    pub noise_floor_compensation: bool,
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
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let cost = BaselineCostModel::default();
        let ofdm = OfdmConfig::default();
        let scenario = ScenarioConfig::default();
        ExperimentConfig {
            fc_hz: scenario.carrier_hz,
            noise_dbm: crate::channel::DEFAULT_NOISE_DBM,
            tx_power_dbm: ofdm.tx_power_dbm,
            d_rfs_m: 3.0,
            d_ij_m: 3.0,
            d_a_m: 1.0,
            v_ij_mps: 0.0,
            keylength: 10,
            n_auth: 1000,
            n_fft: ofdm.n_subcarriers,
            n_cp: ofdm.cp_len,
            sample_rate_hz: ofdm.sample_rate_hz,
            span: scenario.span,
            efficiency: scenario.efficiency,
            profile: ProfileKind::Flat,
            power_mode: PowerModeKind::MeasuredSnr,
            snr_db: 20.0,
            ref_distance_m: 1.0,
            auth: AuthMode::OneWay,
            attack: AttackKind::Impersonation,
            key_update: true,
            reuse_random: false,
            identification: false,
            n_devices: 10,
            sweep: SweepAxis::None,
            sweep_values: Vec::new(),
            seed: 1,
            out: "out".into(),
            li_bins: crate::adversary::DEFAULT_LI_BINS,
            fpr_limits: vec![0.0, 0.02, 0.05],
            target_fpr: 0.02,
            delta: None,
            timing_offset: 0,
            response_delay_s: None,
            layout: LayoutKind::Interleaved,
            ambient: AmbientKind::Repeated,
            noise_floor_compensation: scenario.noise_floor_compensation,
            t_rand: cost.t_rand,
            t_verify: cost.t_verify,
            t_xor: cost.t_xor,
            t_decoding: cost.t_decoding,
            t_hash: cost.t_hash,
            t_gen: cost.t_gen,
            p_decoding_mw: cost.p_decoding_mw,
            p_xor_mw: cost.p_xor_mw,
            p_hash_mw: cost.p_hash_mw,
            snr_target_db: cost.snr_target_db,
        }
    }
}

fn in_range(errors: &mut Vec<String>, name: &str, v: f64, lo: f64, hi: f64) {
    if !(v >= lo && v <= hi) {
        errors.push(format!("{name} = {v} outside [{lo}, {hi}]"));
    }
}

impl ExperimentConfig {
    /// Parses a config file, rejecting unknown keys.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e| Error::Parse(format!("{e}")))?;
        let known = Self::known_keys();
        let unknown: Vec<String> = table
            .keys()
            .filter(|k| !known.contains(k.as_str()))
            .map(|k| format!("unknown key `{k}`"))
            .collect();
        if !unknown.is_empty() {
            return Err(Error::Validation(unknown));
        }
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Parse(format!("{e}")))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Applies `key=value` overrides; values use TOML syntax, with bare
    /// words taken as strings.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        let mut table = match toml::Value::try_from(self) {
            Ok(toml::Value::Table(t)) => t,
            _ => return Err(Error::Config("config does not serialize to a table".into())),
        };
        let known = Self::known_keys();
        for item in overrides {
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{item}` is not key=value")))?;
            let key = key.trim();
            if !known.contains(key) {
                return Err(Error::Validation(vec![format!("unknown key `{key}`")]));
            }
            let value = format!("v = {}", raw.trim())
                .parse::<toml::Table>()
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
            table.insert(key.to_string(), value);
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Parse(format!("{e}")))
    }

    fn known_keys() -> BTreeSet<String> {
        let mut keys: BTreeSet<String> = match toml::Value::try_from(ExperimentConfig::default()) {
            Ok(toml::Value::Table(t)) => t.keys().cloned().collect(),
            _ => BTreeSet::new(),
        };
        keys.insert("delta".into());
        keys.insert("response_delay_s".into());
        keys
    }

    /// Hex digest of the canonical serialization.
    pub fn config_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        hex::encode(&digest[..8])
    }

    /// Problems with a single point, ignoring the sweep.
    fn point_errors(&self) -> Vec<String> {
        let mut e = Vec::new();
        if !(self.fc_hz > 0.0 && self.fc_hz.is_finite()) {
            e.push(format!("fc_hz = {} must be positive", self.fc_hz));
        }
        if !self.noise_dbm.is_finite() {
            e.push("noise_dbm must be finite".into());
        }
        if !(self.d_rfs_m > 0.0 && self.d_rfs_m.is_finite()) {
            e.push(format!("d_rfs_m = {} must be positive", self.d_rfs_m));
        }
        in_range(&mut e, "d_ij_m", self.d_ij_m, 1.0, 10.0);
        in_range(&mut e, "d_a_m", self.d_a_m, 0.1, 2.0);
        in_range(&mut e, "v_ij_mps", self.v_ij_mps, 0.0, 30.0);
        if !(MIN_KEY_LEN..=MAX_KEY_LEN).contains(&self.keylength) {
            e.push(format!(
                "keylength = {} outside [{MIN_KEY_LEN}, {MAX_KEY_LEN}]",
                self.keylength
            ));
        }
        if self.n_auth == 0 {
            e.push("n_auth must be at least 1".into());
        }
        if self.n_cp == 0 || self.n_cp >= self.n_fft {
            e.push(format!("n_cp = {} must be in [1, n_fft = {})", self.n_cp, self.n_fft));
        }
        if !(self.sample_rate_hz > 0.0) {
            e.push("sample_rate_hz must be positive".into());
        }
        if self.span == 0 {
            e.push("span must be at least 1".into());
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            e.push(format!("efficiency = {} outside (0, 1]", self.efficiency));
        }
        if !self.snr_db.is_finite() {
            e.push("snr_db must be finite".into());
        }
        if !(self.ref_distance_m > 0.0) {
            e.push("ref_distance_m must be positive".into());
        }
        if self.n_devices == 0 {
            e.push("n_devices must be at least 1".into());
        }
        if self.li_bins < 2 {
            e.push("li_bins must be at least 2".into());
        }
        in_range(&mut e, "target_fpr", self.target_fpr, 0.0, 1.0);
        for f in &self.fpr_limits {
            in_range(&mut e, "fpr_limits entry", *f, 0.0, 1.0);
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d.is_finite()) {
                e.push(format!("delta = {d} must be positive"));
            }
        }
        if self.timing_offset.unsigned_abs() as usize >= self.n_cp {
            e.push(format!("timing_offset = {} outside the prefix tolerance", self.timing_offset));
        }
        if self.profile.profile().cascade_spread() >= self.n_cp {
            e.push(format!("{} profile two-hop spread does not fit a {}-sample prefix", self.profile.name(), self.n_cp));
        }
        if let Err(err) = self.attacker().validate(self.fc_hz) {
            e.push(err.to_string());
        }
        if self.attack.is_passive() && self.n_auth * self.keylength < 10 * self.li_bins * self.li_bins {
            e.push(format!(
                "n_auth * keylength = {} is too few samples for {} LI bins",
                self.n_auth * self.keylength,
                self.li_bins
            ));
        }
        if let Err(Error::Validation(v)) = self.cost_model().validate() {
            e.extend(v);
        }
        e
    }

    /// Checks every field and reports all problems at once. With a sweep,
    /// each swept point is checked instead of the base values.
    pub fn validate(&self) -> Result<()> {
        let mut e = Vec::new();
        if self.sweep == SweepAxis::None {
            if !self.sweep_values.is_empty() {
                e.push("sweep_values given without a sweep axis".into());
            }
            e.extend(self.point_errors());
        } else if self.sweep_values.is_empty() {
            e.push(format!("sweep `{}` has no values", self.sweep.name()));
        }
        if self.sweep != SweepAxis::None {
            for v in &self.sweep_values {
                match self.at(self.sweep, v) {
                    Ok(point) => e.extend(
                        point
                            .point_errors()
                            .into_iter()
                            .map(|m| format!("sweep value {}: {m}", v.label())),
                    ),
                    Err(err) => e.push(err.to_string()),
                }
            }
        }
        if e.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(e))
        }
    }

    /// Copy of this config with one sweep coordinate applied.
    pub fn at(&self, axis: SweepAxis, value: &SweepValue) -> Result<ExperimentConfig> {
        let mut c = self.clone();
        match axis {
            SweepAxis::None => {}
            SweepAxis::KeyLength => {
                let x = value.number(axis)?;
                if x.fract() != 0.0 || x < 0.0 {
                    return Err(Error::Config(format!("key length {x} is not a whole number")));
                }
                c.keylength = x as usize;
            }
            SweepAxis::Snr => c.snr_db = value.number(axis)?,
            SweepAxis::Distance => c.d_ij_m = value.number(axis)?,
            SweepAxis::Speed => c.v_ij_mps = value.number(axis)?,
            SweepAxis::AttackerDistance => c.d_a_m = value.number(axis)?,
            SweepAxis::Profile => c.profile = value.name().parse()?,
            SweepAxis::Attack => c.attack = value.name().parse()?,
        }
        Ok(c)
    }

    /// The sweep as a list of `(label, point config)`; a single unlabeled
    /// point when there is no sweep.
    pub fn points(&self) -> Result<Vec<(String, ExperimentConfig)>> {
        if self.sweep == SweepAxis::None {
            return Ok(vec![(String::new(), self.clone())]);
        }
        self.sweep_values
            .iter()
            .map(|v| Ok((v.label(), self.at(self.sweep, v)?)))
            .collect()
    }

    pub fn ofdm(&self) -> OfdmConfig {
        OfdmConfig {
            n_subcarriers: self.n_fft,
            cp_len: self.n_cp,
            sample_rate_hz: self.sample_rate_hz,
            tx_power_dbm: self.tx_power_dbm,
            pilot_present: true,
            cp_guard: 0,
        }
    }

    pub fn attacker(&self) -> AttackerConfig {
        AttackerConfig::new(self.attack, self.d_a_m)
    }

    pub fn cost_model(&self) -> BaselineCostModel {
        BaselineCostModel {
            t_tx: 0.0,
            t_rand: self.t_rand,
            t_verify: self.t_verify,
            t_xor: self.t_xor,
            t_decoding: self.t_decoding,
            t_hash: self.t_hash,
            t_gen: self.t_gen,
            p_decoding_mw: self.p_decoding_mw,
            p_xor_mw: self.p_xor_mw,
            p_hash_mw: self.p_hash_mw,
            snr_target_db: self.snr_target_db,
            noise_dbm: self.noise_dbm,
        }
        .with_field_airtime(self.keylength, &self.ofdm(), self.span)
    }

    /// Physical scenario for one trial, with the eavesdropper placed next to
    /// `victim` when given.
    pub fn scenario(&self, victim: Option<Station>) -> Result<ScenarioConfig> {
        let mut s = ScenarioConfig {
            ofdm: self.ofdm(),
            span: self.span,
            efficiency: self.efficiency,
            carrier_hz: self.fc_hz,
            source_to_alice_m: self.d_rfs_m,
            source_to_bob_m: self.d_rfs_m,
            device_distance_m: self.d_ij_m,
            relative_speed_mps: self.v_ij_mps,
            profile: self.profile,
            power: PowerMode::Noiseless,
            ambient: match self.ambient {
                AmbientKind::Repeated => AmbientMode::RepeatedPerStage,
                AmbientKind::Fresh => AmbientMode::Fresh,
            },
            timing_offset: self.timing_offset as isize,
            response_delay_s: self.response_delay_s,
            eve: victim.map(|v| EveConfig {
                victim: v,
                distance_m: self.d_a_m,
            }),
            layout: match self.layout {
                LayoutKind::Interleaved => FieldLayout::Interleaved,
                LayoutKind::Sequential => FieldLayout::Sequential,
            },
            noise_floor_compensation: self.noise_floor_compensation,
            ..ScenarioConfig::default()
        };
        s.power = match self.power_mode {
            PowerModeKind::Noiseless => PowerMode::Noiseless,
            PowerModeKind::MeasuredSnr => PowerMode::MeasuredSnr { snr_db: self.snr_db },
            PowerModeKind::FixedTx => PowerMode::FixedTx {
                tx_power_dbm: self.tx_power_dbm,
                noise_dbm: self.noise_dbm,
            },
            PowerModeKind::ReferenceSnr => PowerMode::FixedTx {
                tx_power_dbm: tx_power_for_mean_snr(&s, self.snr_db, self.noise_dbm, self.ref_distance_m)?,
                noise_dbm: self.noise_dbm,
            },
        };
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml_string();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let cfg = ExperimentConfig::from_toml_str("keylength = 20\nprofile = \"urban\"\n").unwrap();
        assert_eq!(cfg.keylength, 20);
        assert_eq!(cfg.profile, ProfileKind::Urban);
        assert_eq!(cfg.n_auth, 1000);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(
            ExperimentConfig::from_toml_str("keylenght = 20\n"),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn validation_lists_every_offending_field() {
        let cfg = ExperimentConfig {
            keylength: 3,
            d_ij_m: 20.0,
            n_auth: 0,
            ..Default::default()
        };
        match cfg.validate() {
            Err(Error::Validation(v)) => assert_eq!(v.len(), 3, "{v:?}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sweep_values_are_range_checked() {
        let cfg = ExperimentConfig {
            sweep: SweepAxis::Speed,
            sweep_values: vec![SweepValue::Number(10.0), SweepValue::Number(45.0)],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig {
            sweep: SweepAxis::Profile,
            sweep_values: vec![SweepValue::Name("rural".into()), SweepValue::Name("urban".into())],
            ..Default::default()
        };
        cfg.validate().unwrap();
        assert_eq!(cfg.points().unwrap()[1].1.profile, ProfileKind::Urban);
    }

    #[test]
    fn command_line_overrides() {
        let cfg = ExperimentConfig::default()
            .with_overrides(&["p_hash_mw=9".into(), "profile=rural".into(), "delta = 0.5".into()])
            .unwrap();
        assert_eq!(cfg.p_hash_mw, 9.0);
        assert_eq!(cfg.profile, ProfileKind::Rural);
        assert_eq!(cfg.delta, Some(0.5));
        assert!(ExperimentConfig::default().with_overrides(&["bogus=1".into()]).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig {
            seed: 2,
            ..Default::default()
        };
        assert_ne!(a.config_hash(), b.config_hash());
        assert_eq!(a.config_hash(), a.clone().config_hash());
    }
}
