//! Low-rate service-data subcarrier added to the uplink at the DU.
//!
//! Frames are BPSK-modulated with half-sine pulses on a subcarrier placed
//! below the QAM band. Frame layout, bits MSB-first:
//!
//! | field    | size           |
//! |----------|----------------|
//! | preamble | 16 bits, `0xA5C3` |
//! | length   | u16, big-endian |
//! | payload  | `length` bytes |
//! | CRC      | CRC-16/CCITT-FALSE over length and payload |
//!
//! The frame is repeated back to back over the whole waveform (the last
//! copy may be cut short); the first frame starts at sample 0.

use crc::{Crc, CRC_16_IBM_3740};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{config, contract, Error, Result};
use crate::modem::ModemConfig;
use crate::num::Real;
use crate::signals::SampledWaveform;

pub const QOS_PREAMBLE: u16 = 0xA5C3;

/// CRC-16 with polynomial 0x1021, initial value 0xFFFF, no reflection.
pub const QOS_CRC: Crc<u16> = Crc::<u16>::new(&CRC_16_IBM_3740);

/// Minimum coherent preamble energy, as a fraction of the incoherent one.
const PREAMBLE_COHERENCE: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum QosModulation {
    Bpsk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct QosSubcarrierConfig {
    pub enabled: bool,
    /// Offset from the QAM subcarrier.
    pub subcarrier_offset_hz: f64,
    pub bit_rate_bps: f64,
    pub modulation: QosModulation,
    /// Subcarrier power relative to the power of the waveform it is added to.
    pub relative_power_db: f64,
}

impl Default for QosSubcarrierConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            subcarrier_offset_hz: -400e6,
            bit_rate_bps: 1e6,
            modulation: QosModulation::Bpsk,
            relative_power_db: -10.0,
        }
    }
}

impl QosSubcarrierConfig {
    /// Half-width of the main lobe of the half-sine BPSK spectrum.
    pub fn half_bandwidth_hz(&self) -> f64 {
        1.5 * self.bit_rate_bps
    }

    /// Checks that the subcarrier is disjoint from the QAM band and inside
    /// the simulated bandwidth.
    pub fn validate(&self, modem: &ModemConfig) -> Result<()> {
        if !(self.bit_rate_bps > 0.0) {
            return Err(config("qos.bit_rate_bps must be positive"));
        }
        let qam_half = modem.occupied_bandwidth_hz() / 2.0;
        let offset = self.subcarrier_offset_hz.abs();
        if offset - self.half_bandwidth_hz() <= qam_half {
            return Err(config(format!(
                "QoS subcarrier at {:.1} MHz overlaps the QAM band (±{:.1} MHz)",
                self.subcarrier_offset_hz / 1e6,
                qam_half / 1e6
            )));
        }
        let nyquist = modem.sample_rate_hz() / 2.0;
        if offset + self.half_bandwidth_hz() >= nyquist {
            return Err(config(format!(
                "QoS subcarrier at {:.1} MHz lies outside the simulated band (±{:.1} MHz)",
                self.subcarrier_offset_hz / 1e6,
                nyquist / 1e6
            )));
        }
        Ok(())
    }
}

/// Bits of one frame carrying `payload`.
pub fn frame_bits(payload: &[u8]) -> Result<Vec<bool>> {
    let len = u16::try_from(payload.len()).map_err(|_| {
        contract(format!(
            "QoS payload of {} bytes exceeds 65535",
            payload.len()
        ))
    })?;
    let mut body = len.to_be_bytes().to_vec();
    body.extend_from_slice(payload);
    let crc = QOS_CRC.checksum(&body);
    let mut bytes = QOS_PREAMBLE.to_be_bytes().to_vec();
    bytes.extend_from_slice(&body);
    bytes.extend_from_slice(&crc.to_be_bytes());
    Ok(bytes
        .iter()
        .flat_map(|&b| (0..8).rev().map(move |i| b >> i & 1 == 1))
        .collect())
}

fn bytes_from_bits(bits: &[bool]) -> Vec<u8> {
    bits.chunks(8)
        .map(|c| c.iter().fold(0u8, |acc, &b| acc << 1 | b as u8))
        .collect()
}

/// Whole bits that fit in `len` samples.
fn bit_capacity(len: usize, sample_rate_hz: f64, bit_rate_bps: f64) -> usize {
    (len as f64 * bit_rate_bps / sample_rate_hz).floor() as usize
}

/// Bit index and half-sine weight of sample `n`.
fn pulse_at(n: usize, sample_rate_hz: f64, bit_rate_bps: f64) -> (usize, f64) {
    let x = n as f64 * bit_rate_bps / sample_rate_hz;
    let k = x.floor();
    (k as usize, (std::f64::consts::PI * (x - k)).sin())
}

fn subcarrier(n: usize, offset_hz: f64, sample_rate_hz: f64) -> Complex<f64> {
    let cycles = (offset_hz / sample_rate_hz * n as f64).fract();
    Complex::from_polar(1.0, 2.0 * std::f64::consts::PI * cycles)
}

/// Superimposes the framed `payload` on `detected`, repeating the frame
/// back to back over the whole waveform.
pub fn add_service_data<T: Real>(
    detected: &SampledWaveform<T>,
    qos_payload: &[u8],
    cfg: &QosSubcarrierConfig,
    modem: &ModemConfig,
) -> Result<SampledWaveform<T>> {
    if !cfg.enabled {
        return Ok(detected.clone());
    }
    cfg.validate(modem)?;
    let fs = detected.sample_rate_hz();
    let frame = frame_bits(qos_payload)?;
    let capacity = bit_capacity(detected.len(), fs, cfg.bit_rate_bps);
    if capacity < frame.len() {
        return Err(config(format!(
            "waveform holds {capacity} QoS bits, one frame needs {} (run more symbols or disable qos)",
            frame.len()
        )));
    }
    let reference = detected.power().to_f64_lossless();
    // half-sine pulses carry half the peak power
    let amplitude = (2.0 * reference * 10f64.powf(cfg.relative_power_db / 10.0)).sqrt();
    let mut samples = detected.samples().to_vec();
    for (n, s) in samples.iter_mut().enumerate() {
        let (k, w) = pulse_at(n, fs, cfg.bit_rate_bps);
        let sign = if frame[k % frame.len()] { 1.0 } else { -1.0 };
        let q = subcarrier(n, cfg.subcarrier_offset_hz, fs) * (sign * w * amplitude);
        *s = *s + Complex::new(T::lit(q.re), T::lit(q.im));
    }
    detected.with_samples(samples)
}

/// Recovered service data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QosExtraction {
    pub payload: Vec<u8>,
    pub crc_ok: bool,
}

/// Matched-filter outputs of every whole bit.
fn soft_bits<T: Real>(wf: &SampledWaveform<T>, cfg: &QosSubcarrierConfig) -> Vec<Complex<f64>> {
    let fs = wf.sample_rate_hz();
    let mut out = vec![Complex::new(0.0, 0.0); bit_capacity(wf.len(), fs, cfg.bit_rate_bps)];
    for (n, s) in wf.samples().iter().enumerate() {
        let (k, w) = pulse_at(n, fs, cfg.bit_rate_bps);
        if k >= out.len() {
            break;
        }
        let x = Complex::new(s.re.to_f64_lossless(), s.im.to_f64_lossless());
        out[k] += x * subcarrier(n, cfg.subcarrier_offset_hz, fs).conj() * w;
    }
    out
}

/// Demodulates the first frame, using the preamble as phase reference.
pub fn extract_service_data<T: Real>(
    uplink: &SampledWaveform<T>,
    cfg: &QosSubcarrierConfig,
) -> Result<QosExtraction> {
    if !cfg.enabled {
        return Err(Error::Extraction("QoS subcarrier disabled".into()));
    }
    let soft = soft_bits(uplink, cfg);
    let preamble: Vec<f64> = (0..16)
        .rev()
        .map(|i| {
            if QOS_PREAMBLE >> i & 1 == 1 {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    if soft.len() < 48 {
        return Err(Error::Extraction(format!(
            "only {} QoS bits in the waveform",
            soft.len()
        )));
    }
    let coherent: Complex<f64> = preamble.iter().zip(&soft).map(|(p, y)| y * p).sum();
    let incoherent: f64 = soft[..16].iter().map(|y| y.norm()).sum();
    if !(coherent.norm() >= PREAMBLE_COHERENCE * incoherent && incoherent > 0.0) {
        return Err(Error::Extraction("preamble not found".into()));
    }
    let phase = coherent / coherent.norm();
    let bits: Vec<bool> = soft.iter().map(|y| (y * phase.conj()).re > 0.0).collect();
    let len_bytes = bytes_from_bits(&bits[16..32]);
    let len = u16::from_be_bytes([len_bytes[0], len_bytes[1]]) as usize;
    let end = 32 + 8 * len + 16;
    if end > bits.len() {
        return Err(Error::Extraction(format!(
            "frame length field {len} runs past the {} available bits",
            bits.len()
        )));
    }
    let body = bytes_from_bits(&bits[16..32 + 8 * len]);
    let crc = bytes_from_bits(&bits[32 + 8 * len..end]);
    let crc_ok = QOS_CRC.checksum(&body) == u16::from_be_bytes([crc[0], crc[1]]);
    Ok(QosExtraction {
        payload: body[2..].to_vec(),
        crc_ok,
    })
}
