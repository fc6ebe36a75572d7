use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::qos::QosSubcarrierConfig;
use crate::error::{config, Result};
use crate::metrics::EvmThresholds;
use crate::modem::ModemConfig;
use crate::num::dbm_to_w;
use crate::oil_vcsel::VcselParams;
use crate::photonics::{
    BandpassParams, DirectTxParams, EdfaParams, FiberParams, LaserParams, MzmParams, PdParams,
    RfAmpParams,
};

/// Waveform capture points.
pub const TAP_NAMES: [&str; 5] = ["cu_tx", "du_detected", "du_uplink_drive", "mso1", "mso2"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct CirculatorParams {
    /// Loss of each port-to-port pass.
    pub insertion_loss_db: f64,
}

impl Default for CirculatorParams {
    fn default() -> Self {
        Self {
            insertion_loss_db: 0.8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryMode {
    DataAided,
    DecisionDirected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ReceiverParams {
    /// Excess white noise at every detector output (DU, RU and CU),
    /// dBm/Hz. Stands in for the receiver electronics of the test bench.
    pub noise_floor_dbm_hz: f64,
    pub recovery: RecoveryMode,
}

impl Default for ReceiverParams {
    fn default() -> Self {
        Self {
            noise_floor_dbm_hz: -140.0,
            recovery: RecoveryMode::DataAided,
        }
    }
}

impl ReceiverParams {
    pub fn noise_floor_w_hz(&self) -> f64 {
        dbm_to_w(self.noise_floor_dbm_hz)
    }
}

/// Noise switches. `enabled` gates everything; `downlink` covers the RU
/// detector and LNA, `uplink` the DU detector and the CU detector and LNA;
/// `penalty` the injection penalty of the VCSEL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub enabled: bool,
    pub downlink: bool,
    pub uplink: bool,
    pub penalty: bool,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            downlink: true,
            uplink: true,
            penalty: true,
        }
    }
}

impl NoiseConfig {
    pub fn off() -> Self {
        Self {
            enabled: false,
            downlink: false,
            uplink: false,
            penalty: false,
        }
    }
}

/// The duplex testbed: CU → OF1 → DU (circulator + OIL-VCSEL) → OF2 → RU
/// downstream, DU → OF1 → CU upstream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub modem: ModemConfig,
    pub source: LaserParams,
    pub mzm: MzmParams,
    pub edfa: EdfaParams,
    pub circulator: CirculatorParams,
    /// PIN photodiodes at the RU and the CU.
    pub pin: PdParams,
    pub lna_ru: RfAmpParams,
    pub lna_cu: RfAmpParams,
    pub bpf: BandpassParams,
    pub vcsel: VcselParams,
    pub uplink_tx: DirectTxParams,
    /// CU–DU span, traversed in both directions.
    #[serde(rename = "of1")]
    pub of1_fiber: FiberParams,
    /// DU–RU span.
    #[serde(rename = "of2")]
    pub of2_fiber: FiberParams,
    pub receiver: ReceiverParams,
    pub noise: NoiseConfig,
    pub qos: QosSubcarrierConfig,
    pub thresholds: EvmThresholds,
    pub seed: u64,
    /// QAM symbols per run.
    pub symbols: usize,
    pub taps: Vec<String>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            modem: ModemConfig::default(),
            source: LaserParams::default(),
            mzm: MzmParams::default(),
            edfa: EdfaParams::default(),
            circulator: CirculatorParams::default(),
            pin: PdParams::default(),
            lna_ru: RfAmpParams::default(),
            lna_cu: RfAmpParams::default(),
            bpf: BandpassParams::default(),
            vcsel: VcselParams::default(),
            uplink_tx: DirectTxParams::default(),
            of1_fiber: FiberParams::with_length(0.0),
            of2_fiber: FiberParams::with_length(1.0),
            receiver: ReceiverParams::default(),
            noise: NoiseConfig::default(),
            qos: QosSubcarrierConfig::default(),
            thresholds: EvmThresholds::default(),
            seed: 1,
            symbols: 100_000,
            taps: vec!["mso1".into(), "mso2".into()],
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.modem.validate()?;
        self.thresholds.for_order(self.modem.order_m)?;
        self.vcsel.validate_at(self.source.wavelength_nm)?;
        self.pin.validate("pin", self.source.wavelength_nm)?;
        self.pin.validate("pin", self.uplink_tx.wavelength_nm)?;
        self.lna_ru.validate("lna_ru")?;
        self.lna_cu.validate("lna_cu")?;
        self.of1_fiber.validate("of1")?;
        self.of2_fiber.validate("of2")?;
        if !(self.bpf.f_lo_hz < self.bpf.f_hi_hz) {
            return Err(config("bpf.f_lo_hz must be below bpf.f_hi_hz"));
        }
        if !(self.source.wavelength_nm > 0.0 && self.uplink_tx.wavelength_nm > 0.0) {
            return Err(config("wavelengths must be positive"));
        }
        if !(self.edfa.gain_db >= 0.0 && self.edfa.nf_db >= 0.0) {
            return Err(config("edfa gain and noise figure must be non-negative"));
        }
        if !(self.circulator.insertion_loss_db >= 0.0) {
            return Err(config("circulator.insertion_loss_db must be non-negative"));
        }
        if !self.receiver.noise_floor_dbm_hz.is_finite() {
            return Err(config("receiver.noise_floor_dbm_hz must be finite"));
        }
        if self.symbols < crate::metrics::MIN_EVM_SYMBOLS {
            return Err(config(format!(
                "symbols must be at least {}",
                crate::metrics::MIN_EVM_SYMBOLS
            )));
        }
        if self.qos.enabled {
            self.qos.validate(&self.modem)?;
        }
        let mut seen = BTreeSet::new();
        for tap in &self.taps {
            if !TAP_NAMES.contains(&tap.as_str()) {
                return Err(config(format!(
                    "unknown tap `{tap}`; valid taps: {}",
                    TAP_NAMES.join(", ")
                )));
            }
            if !seen.insert(tap) {
                return Err(config(format!("tap `{tap}` listed twice")));
            }
        }
        Ok(())
    }

    /// Parses a full or partial scenario; missing fields take their
    /// defaults.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let user: Value =
            serde_json::from_str(text).map_err(|e| config(format!("invalid JSON: {e}")))?;
        let mut merged = serde_json::to_value(Scenario::default())?;
        merge(&mut merged, user);
        let scenario = from_value(merged)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenario serializes");
        s.push('\n');
        s
    }

    /// Value at a dotted path, e.g. `of1.length_km`.
    pub fn get(&self, path: &str) -> Result<Value> {
        let v = serde_json::to_value(self)?;
        lookup(&v, path).cloned()
    }

    /// Copy with the given dotted-path assignments applied and validated.
    pub fn with_overrides<'a, I>(&self, overrides: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, Value)>,
    {
        let mut v = serde_json::to_value(self)?;
        for (path, value) in overrides {
            assign(&mut v, path, value)?;
        }
        let scenario = from_value(v)?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Copy with a numeric parameter set.
    pub fn with_number(&self, path: &str, value: f64) -> Result<Self> {
        let current = self.get(path)?;
        let v = if current.is_u64() || current.is_i64() {
            if value.fract() != 0.0 {
                return Err(config(format!("{path} takes an integer, got {value}")));
            }
            Value::from(value as i64)
        } else if current.is_number() {
            Value::from(value)
        } else {
            return Err(config(format!("{path} is not a numeric parameter")));
        };
        self.with_overrides([(path, v)])
    }

    /// Every dotted leaf path of the scenario.
    pub fn parameter_paths() -> Vec<String> {
        let v = serde_json::to_value(Scenario::default()).expect("scenario serializes");
        let mut out = Vec::new();
        collect_paths(&v, String::new(), &mut out);
        out
    }
}

/// Default testbed with `overrides` applied last.
pub fn build_testbed_scenario<'a, I>(overrides: I) -> Result<Scenario>
where
    I: IntoIterator<Item = (&'a str, Value)>,
{
    Scenario::default().with_overrides(overrides)
}

fn from_value(v: Value) -> Result<Scenario> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let path = e.path().to_string();
        config(format!("at `{path}`: {}", e.into_inner()))
    })
}

/// Recursively overlays `user` onto `base`; non-object values replace.
fn merge(base: &mut Value, user: Value) {
    match (base, user) {
        (Value::Object(b), Value::Object(u)) => {
            for (k, v) in u {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn collect_paths(v: &Value, prefix: String, out: &mut Vec<String>) {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                let p = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                collect_paths(child, p, out);
            }
        }
        _ => out.push(prefix),
    }
}

fn unknown_path(path: &str) -> crate::Error {
    config(format!(
        "unknown parameter `{path}`; valid keys: {}",
        Scenario::parameter_paths().join(", ")
    ))
}

fn lookup<'v>(v: &'v Value, path: &str) -> Result<&'v Value> {
    let mut cur = v;
    for key in path.split('.') {
        cur = cur
            .as_object()
            .and_then(|m| m.get(key))
            .ok_or_else(|| unknown_path(path))?;
    }
    Ok(cur)
}

fn assign(v: &mut Value, path: &str, value: Value) -> Result<()> {
    let mut cur = v;
    for key in path.split('.') {
        cur = cur
            .as_object_mut()
            .and_then(|m| m.get_mut(key))
            .ok_or_else(|| unknown_path(path))?;
    }
    *cur = value;
    Ok(())
}
