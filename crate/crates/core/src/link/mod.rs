//! Scenario assembly and end-to-end execution of the duplex testbed.
//!
//! Downlink: QAM modem → MZM → EDFA → OF1 → circulator → OIL-VCSEL
//! (reflected) → circulator → OF2 → RU PIN → LNA → BPF.
//!
//! Uplink: OIL-VCSEL (detected) → QoS subcarrier → directly modulated
//! laser → OF1 → CU PIN → LNA.
//!
//! Every block is zero-phase, so the only sample delay is the pulse
//! shaper's; fiber latency is recorded in the delay ledger but not applied
//! to the sampled envelopes.

mod qos;
mod scenario;

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use qos::{
    add_service_data, extract_service_data, frame_bits, QosExtraction, QosModulation,
    QosSubcarrierConfig, QOS_CRC, QOS_PREAMBLE,
};
pub use scenario::{
    build_testbed_scenario, CirculatorParams, NoiseConfig, ReceiverParams, RecoveryMode, Scenario,
    TAP_NAMES,
};

use crate::error::{contract, Diagnostic, Error, Result};
use crate::metrics::{EvmReport, Verdict};
use crate::modem::{
    bits_per_symbol, pulse_shape, qam_map, recover_symbols, SymbolStream, SymbolTiming,
};
use crate::num::{lin_to_db, Real};
use crate::oil_vcsel::{transact, LockState};
use crate::photonics::{
    bandpass, circulator_pass, direct_modulate, edfa_amplify, fiber_propagate, mzm_modulate,
    pin_detect, rf_amplify, DetectorNoise, OpticalSignal,
};
use crate::signals::{RngHandle, SampledWaveform};

/// Noise stream identifiers.
pub mod streams {
    pub const PAYLOAD: u64 = 0;
    pub const DU_DETECT: u64 = 1;
    pub const RU_PIN: u64 = 2;
    pub const RU_LNA: u64 = 3;
    pub const CU_PIN: u64 = 4;
    pub const CU_LNA: u64 = 5;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayEntry {
    pub stage: String,
    pub sample_delay: usize,
    pub propagation_s: f64,
}

/// Optical levels and detector SNRs of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub vcsel_incident_dbm: f64,
    pub ru_pin_dbm: f64,
    pub cu_pin_dbm: f64,
    pub ru_osnr_db: Option<f64>,
    pub injection_penalty_db: f64,
    /// Detector SNRs in the matched-filter noise bandwidth; absent when
    /// the corresponding noise is switched off.
    pub du_detector_snr_db: Option<f64>,
    pub ru_detector_snr_db: Option<f64>,
    pub cu_detector_snr_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QosOutcome {
    pub payload: Vec<u8>,
    pub crc_ok: bool,
    pub error: Option<String>,
}

impl QosOutcome {
    pub fn delivered(&self, sent: &[u8]) -> bool {
        self.crc_ok && self.payload == sent
    }
}

/// Result of one end-to-end run.
#[derive(Debug, Clone)]
pub struct LinkRun<T: Real> {
    pub tap_waveforms: BTreeMap<String, SampledWaveform<T>>,
    pub tx_symbols: SymbolStream<T>,
    pub downlink_symbols_at_ru: SymbolStream<T>,
    pub uplink_symbols_at_cu: SymbolStream<T>,
    pub downlink_evm: EvmReport,
    pub uplink_evm: EvmReport,
    /// `None` when the QoS subcarrier is disabled.
    pub qos: Option<QosOutcome>,
    pub lock_state: LockState,
    pub delays: Vec<DelayEntry>,
    pub budget: LinkBudget,
    pub diagnostics: Vec<Diagnostic>,
}

impl<T: Real> LinkRun<T> {
    pub fn qos_payload_recovered(&self) -> &[u8] {
        self.qos.as_ref().map_or(&[], |q| q.payload.as_slice())
    }

    /// Both EVM verdicts pass and, when enabled, the QoS frame arrived intact.
    pub fn passed(&self) -> bool {
        self.downlink_evm.verdict == Verdict::Pass
            && self.uplink_evm.verdict == Verdict::Pass
            && self.qos.as_ref().is_none_or(|q| q.crc_ok)
    }
}

/// Uniform random payload of `symbols` QAM symbols, keyed by the scenario seed.
pub fn payload_bits(scenario: &Scenario) -> Result<Vec<bool>> {
    let n = scenario.symbols * bits_per_symbol(scenario.modem.order_m)?;
    let mut rng = RngHandle::new(scenario.seed, streams::PAYLOAD).generator();
    Ok((0..n).map(|_| rng.random::<bool>()).collect())
}

pub fn qos_payload(scenario: &Scenario) -> Vec<u8> {
    format!("rofsim qos seed={}", scenario.seed).into_bytes()
}

/// Runs with the payloads derived from the scenario seed.
pub fn run_default<T: Real>(scenario: &Scenario) -> Result<LinkRun<T>> {
    run(scenario, &payload_bits(scenario)?, &qos_payload(scenario))
}

fn detector_noise(scenario: &Scenario, on: bool) -> DetectorNoise {
    if scenario.noise.enabled && on {
        DetectorNoise::physical(scenario.receiver.noise_floor_w_hz())
    } else {
        DetectorNoise::disabled()
    }
}

fn snr_db(on: bool, snr: f64) -> Option<f64> {
    (on && snr.is_finite()).then(|| lin_to_db(snr))
}

struct Taps<'a, T: Real> {
    wanted: &'a [String],
    captured: BTreeMap<String, SampledWaveform<T>>,
}

impl<T: Real> Taps<'_, T> {
    fn capture(&mut self, name: &str, wf: &SampledWaveform<T>) -> Result<()> {
        if !wf.all_finite() {
            return Err(contract(format!("non-finite samples at {name}")));
        }
        if self.wanted.iter().any(|t| t == name) {
            self.captured.insert(name.to_string(), wf.clone());
        }
        Ok(())
    }
}

/// Executes the duplex chain once.
pub fn run<T: Real>(
    scenario: &Scenario,
    payload_bits: &[bool],
    qos_payload: &[u8],
) -> Result<LinkRun<T>> {
    scenario.validate()?;
    if payload_bits.is_empty() {
        return Err(contract("payload must not be empty"));
    }
    let s = scenario;
    let modem = &s.modem;
    let seed = s.seed;
    let mut diagnostics = Vec::new();
    let mut delays = Vec::new();
    let mut taps = Taps {
        wanted: &s.taps,
        captured: BTreeMap::new(),
    };
    let noise_on = s.noise.enabled;
    let down_on = noise_on && s.noise.downlink;
    let up_on = noise_on && s.noise.uplink;

    let tx_symbols = qam_map::<T>(payload_bits, modem.order_m)?;
    let shaped = pulse_shape(&tx_symbols, modem)?;
    diagnostics.extend(shaped.diagnostics);
    delays.push(DelayEntry {
        stage: "pulse_shape".into(),
        sample_delay: shaped.delay_samples,
        propagation_s: 0.0,
    });
    let tx = shaped.waveform;
    taps.capture("cu_tx", &tx)?;
    let timing = SymbolTiming {
        first_symbol_sample: delays.iter().map(|d| d.sample_delay).sum(),
        count: tx_symbols.len(),
    };

    let (modulated, mzm_diag) = mzm_modulate(&tx, &s.source, &s.mzm)?;
    diagnostics.extend(mzm_diag);
    let amplified = edfa_amplify(&modulated, s.edfa.gain_db, s.edfa.nf_db)?;
    let at_du = fiber_propagate(&amplified, &s.of1_fiber)?;
    delays.push(DelayEntry {
        stage: "of1_downlink".into(),
        sample_delay: 0,
        propagation_s: s.of1_fiber.propagation_delay_s(),
    });
    let incident = circulator_pass(&at_du, s.circulator.insertion_loss_db)?;

    let du_noise = detector_noise(s, s.noise.uplink);
    let penalty = noise_on && s.noise.penalty;
    let event = transact(
        &incident,
        &s.vcsel,
        &du_noise,
        penalty,
        RngHandle::new(seed, streams::DU_DETECT),
    )
    .map_err(|e| match e {
        Error::Lock { state, .. } => Error::Lock {
            stage: "du".into(),
            state,
        },
        other => other,
    })?;
    diagnostics.extend(event.detected.diagnostics.iter().cloned());

    // downlink
    let toward_ru = circulator_pass(&event.reflected, s.circulator.insertion_loss_db)?;
    let at_ru = fiber_propagate(&toward_ru, &s.of2_fiber)?;
    delays.push(DelayEntry {
        stage: "of2".into(),
        sample_delay: 0,
        propagation_s: s.of2_fiber.propagation_delay_s(),
    });
    let ru_det = pin_detect(
        &at_ru,
        &s.pin,
        &detector_noise(s, s.noise.downlink),
        RngHandle::new(seed, streams::RU_PIN),
    )?;
    diagnostics.extend(ru_det.diagnostics.iter().cloned());
    let ru_amp = rf_amplify(
        &ru_det.waveform,
        &s.lna_ru,
        down_on,
        RngHandle::new(seed, streams::RU_LNA),
    )?;
    let mso1 = bandpass(&ru_amp, s.bpf.f_lo_hz, s.bpf.f_hi_hz)?;
    taps.capture("mso1", &mso1)?;

    // uplink
    taps.capture("du_detected", &event.detected.waveform)?;
    let drive = add_service_data(&event.detected.waveform, qos_payload, &s.qos, modem)?;
    taps.capture("du_uplink_drive", &drive)?;
    let up_optical: OpticalSignal<T> = direct_modulate(&drive, &s.uplink_tx)?;
    let at_cu = fiber_propagate(&up_optical, &s.of1_fiber)?;
    delays.push(DelayEntry {
        stage: "of1_uplink".into(),
        sample_delay: 0,
        propagation_s: s.of1_fiber.propagation_delay_s(),
    });
    let cu_det = pin_detect(
        &at_cu,
        &s.pin,
        &detector_noise(s, s.noise.uplink),
        RngHandle::new(seed, streams::CU_PIN),
    )?;
    diagnostics.extend(cu_det.diagnostics.iter().cloned());
    let mso2 = rf_amplify(
        &cu_det.waveform,
        &s.lna_cu,
        up_on,
        RngHandle::new(seed, streams::CU_LNA),
    )?;
    taps.capture("mso2", &mso2)?;

    let reference = match s.receiver.recovery {
        RecoveryMode::DataAided => Some(&tx_symbols),
        RecoveryMode::DecisionDirected => None,
    };
    let down = recover_symbols(&mso1, modem, Some(&timing), reference)?;
    let up = recover_symbols(&mso2, modem, Some(&timing), reference)?;
    let downlink_evm = EvmReport::from_streams(&down, &tx_symbols, &s.thresholds)?;
    let uplink_evm = EvmReport::from_streams(&up, &tx_symbols, &s.thresholds)?;
    if !(downlink_evm.evm_rms_percent.is_finite() && uplink_evm.evm_rms_percent.is_finite()) {
        return Err(contract("non-finite EVM"));
    }

    let qos = s
        .qos
        .enabled
        .then(|| match extract_service_data(&mso2, &s.qos) {
            Ok(x) => QosOutcome {
                payload: x.payload,
                crc_ok: x.crc_ok,
                error: None,
            },
            Err(e) => QosOutcome {
                payload: Vec::new(),
                crc_ok: false,
                error: Some(e.to_string()),
            },
        });

    let nb = modem.noise_bandwidth_hz();
    let budget = LinkBudget {
        vcsel_incident_dbm: incident.avg_power_dbm,
        ru_pin_dbm: at_ru.avg_power_dbm,
        cu_pin_dbm: at_cu.avg_power_dbm,
        ru_osnr_db: at_ru.osnr_db(),
        injection_penalty_db: event.penalty_db,
        du_detector_snr_db: snr_db(up_on, event.detected.snr(nb)),
        ru_detector_snr_db: snr_db(down_on, ru_det.snr(nb)),
        cu_detector_snr_db: snr_db(up_on, cu_det.snr(nb)),
    };

    Ok(LinkRun {
        tap_waveforms: taps.captured,
        tx_symbols,
        downlink_symbols_at_ru: down,
        uplink_symbols_at_cu: up,
        downlink_evm,
        uplink_evm,
        qos,
        lock_state: event.lock,
        delays,
        budget,
        diagnostics,
    })
}
