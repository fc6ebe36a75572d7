//! Behavioral models of the optical and RF link components.
//!
//! Optical blocks carry a ledger (average power, modulation index, OSNR,
//! laser RIN) plus the unit-power RF envelope that rides on the carrier.
//! Every noise process is turned into additive electrical noise at
//! detection. Electrical noise is specified as a density and drawn over
//! the full simulated bandwidth, so the matched filter sees it in its
//! own noise bandwidth (the symbol rate).
//!
//! Electrical envelope convention: `mean |x|²` is the power delivered to
//! the load, in watts. A photocurrent envelope `i(t)` is therefore
//! represented as `i(t)·√R_load`.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{config, contract, Diagnostic, Result};
use crate::num::{db_to_lin, dbm_to_w, Real};
use crate::signals::{add_awgn, apply_frequency_response, RngHandle, SampledWaveform};

pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
pub const BOLTZMANN: f64 = 1.380_649e-23;
pub const PLANCK: f64 = 6.626_070_15e-34;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Noise-figure reference temperature, K.
pub const T0_KELVIN: f64 = 290.0;
/// 0.1 nm at 1550 nm.
pub const OSNR_REF_BANDWIDTH_HZ: f64 = 12.5e9;

/// Wavelength of a 192.2 THz carrier, nm.
pub const DEFAULT_WAVELENGTH_NM: f64 = 1559.8;

/// `q·λ/(h·c)`: responsivity at unit quantum efficiency.
pub fn quantum_limit_responsivity(wavelength_nm: f64) -> f64 {
    ELEMENTARY_CHARGE * wavelength_nm * 1e-9 / (PLANCK * SPEED_OF_LIGHT)
}

pub fn optical_frequency_hz(wavelength_nm: f64) -> f64 {
    SPEED_OF_LIGHT / (wavelength_nm * 1e-9)
}

/// Optical carrier with an intensity-modulated RF envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct OpticalSignal<T: Real> {
    pub avg_power_dbm: f64,
    pub wavelength_nm: f64,
    /// Optical modulation index of the RF subcarrier.
    pub mod_index: f64,
    /// RF modulating waveform, unit power for an undistorted drive.
    pub envelope: SampledWaveform<T>,
    /// Signal to ASE ratio in [`OSNR_REF_BANDWIDTH_HZ`]; infinite when no
    /// amplifier has been traversed.
    pub osnr_linear: f64,
    /// Relative intensity noise of the source laser, dB/Hz.
    pub rin_db_hz: Option<f64>,
}

impl<T: Real> OpticalSignal<T> {
    pub fn avg_power_w(&self) -> f64 {
        dbm_to_w(self.avg_power_dbm)
    }

    pub fn osnr_db(&self) -> Option<f64> {
        self.osnr_linear
            .is_finite()
            .then(|| 10.0 * self.osnr_linear.log10())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct LaserParams {
    pub power_dbm: f64,
    pub wavelength_nm: f64,
    /// `null` disables laser intensity noise.
    pub rin_db_hz: Option<f64>,
}

impl Default for LaserParams {
    fn default() -> Self {
        Self {
            power_dbm: 6.0,
            wavelength_nm: DEFAULT_WAVELENGTH_NM,
            rin_db_hz: Some(-150.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct MzmParams {
    /// Peak drive as a fraction of the half-wave voltage, in (0, 1].
    pub half_wave_drive_ratio: f64,
    pub insertion_loss_db: f64,
}

impl Default for MzmParams {
    fn default() -> Self {
        Self {
            half_wave_drive_ratio: 0.25,
            insertion_loss_db: 5.0,
        }
    }
}

/// Drive ratio above which the sinusoidal transfer's cubic term is applied.
pub const MZM_LINEAR_LIMIT: f64 = 0.3;

/// Quadrature-biased Mach-Zehnder intensity modulation.
///
/// The transmitted intensity is `P(1 + sin u)` with
/// `u(t) = Re{a(t)·e^{jωt}}` and `a = (π/2)·ratio·drive`. In the linear
/// regime the RF envelope of the intensity is `a`; above
/// [`MZM_LINEAR_LIMIT`] the in-band third-order term of `sin` is kept,
/// giving `a·(1 − |a|²/8)`. Average power is the laser power less 3 dB
/// for the quadrature bias and the insertion loss.
pub fn mzm_modulate<T: Real>(
    drive: &SampledWaveform<T>,
    laser: &LaserParams,
    mzm: &MzmParams,
) -> Result<(OpticalSignal<T>, Vec<Diagnostic>)> {
    let ratio = mzm.half_wave_drive_ratio;
    if !(ratio > 0.0) {
        return Err(contract(format!(
            "MZM drive ratio must be positive, got {ratio}"
        )));
    }
    if ratio > 1.0 {
        return Err(config(format!(
            "MZM over-driven: drive ratio {ratio} exceeds 1"
        )));
    }
    if mzm.insertion_loss_db < 0.0 {
        return Err(config("MZM insertion loss must be non-negative"));
    }
    let mut diagnostics = Vec::new();
    let small_signal = std::f64::consts::FRAC_PI_2 * ratio;
    let envelope = if ratio > MZM_LINEAR_LIMIT {
        let m = T::lit(small_signal);
        let eighth = T::lit(0.125);
        let samples = drive
            .samples()
            .iter()
            .map(|&x| {
                let a = x * m;
                x * (T::one() - a.norm_sqr() * eighth)
            })
            .collect();
        drive.with_samples(samples)?
    } else {
        drive.clone()
    };
    let mod_index = if small_signal > 1.0 {
        diagnostics.push(Diagnostic::new(
            "mzm",
            format!("modulation index {small_signal:.3} clamped to 1"),
        ));
        1.0
    } else {
        small_signal
    };
    let avg_power_dbm = laser.power_dbm - 10.0 * 2f64.log10() - mzm.insertion_loss_db;
    Ok((
        OpticalSignal {
            avg_power_dbm,
            wavelength_nm: laser.wavelength_nm,
            mod_index,
            envelope,
            osnr_linear: f64::INFINITY,
            rin_db_hz: laser.rin_db_hz,
        },
        diagnostics,
    ))
}

/// Directly modulated laser: the drive is rescaled to unit power and
/// imposed with a fixed modulation index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct DirectTxParams {
    pub power_dbm: f64,
    pub wavelength_nm: f64,
    pub mod_index: f64,
    pub rin_db_hz: Option<f64>,
}

impl Default for DirectTxParams {
    fn default() -> Self {
        Self {
            power_dbm: 4.0,
            wavelength_nm: 1550.0,
            mod_index: 0.3,
            rin_db_hz: Some(-150.0),
        }
    }
}

pub fn direct_modulate<T: Real>(
    drive: &SampledWaveform<T>,
    tx: &DirectTxParams,
) -> Result<OpticalSignal<T>> {
    if !(tx.mod_index > 0.0 && tx.mod_index <= 1.0) {
        return Err(config(format!(
            "transmitter modulation index {} outside (0, 1]",
            tx.mod_index
        )));
    }
    let p = drive.power().to_f64_lossless();
    if !(p > 0.0 && p.is_finite()) {
        return Err(contract("cannot modulate with a zero-power drive"));
    }
    let envelope = drive.scaled(Complex::new(T::lit(1.0 / p.sqrt()), T::zero()));
    Ok(OpticalSignal {
        avg_power_dbm: tx.power_dbm,
        wavelength_nm: tx.wavelength_nm,
        mod_index: tx.mod_index,
        envelope,
        osnr_linear: f64::INFINITY,
        rin_db_hz: tx.rin_db_hz,
    })
}

/// Single-mode fiber span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct FiberParams {
    pub length_km: f64,
    pub atten_db_per_km: f64,
    pub dispersion_ps_nm_km: f64,
    pub group_index: f64,
}

impl Default for FiberParams {
    fn default() -> Self {
        Self {
            length_km: 0.0,
            atten_db_per_km: 0.2,
            dispersion_ps_nm_km: 17.0,
            group_index: 1.468,
        }
    }
}

impl FiberParams {
    pub fn with_length(length_km: f64) -> Self {
        Self {
            length_km,
            ..Self::default()
        }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if !(self.length_km.is_finite() && self.length_km >= 0.0) {
            return Err(config(format!("{name}.length_km must be non-negative")));
        }
        if !(self.atten_db_per_km >= 0.0) {
            return Err(config(format!(
                "{name}.atten_db_per_km must be non-negative"
            )));
        }
        if !(self.group_index >= 1.0) {
            return Err(config(format!("{name}.group_index must be at least 1")));
        }
        Ok(())
    }

    pub fn loss_db(&self) -> f64 {
        self.atten_db_per_km * self.length_km
    }

    pub fn propagation_delay_s(&self) -> f64 {
        self.length_km * 1e3 * self.group_index / SPEED_OF_LIGHT
    }
}

/// Argument `π·λ²·D·L·f²/c` of the IM-DD dispersion fading factor.
pub fn dispersion_phase(rf_hz: f64, wavelength_nm: f64, fiber: &FiberParams) -> f64 {
    let lambda = wavelength_nm * 1e-9;
    // ps/(nm·km) → s/m²
    let d = fiber.dispersion_ps_nm_km * 1e-6;
    let l = fiber.length_km * 1e3;
    std::f64::consts::PI * lambda * lambda * d * l * rf_hz * rf_hz / SPEED_OF_LIGHT
}

/// RF amplitude transfer `cos(π·λ²·D·L·f²/c)` of double-sideband IM-DD.
pub fn dispersion_factor(rf_hz: f64, wavelength_nm: f64, fiber: &FiberParams) -> f64 {
    dispersion_phase(rf_hz, wavelength_nm, fiber).cos()
}

/// Electrical power penalty of dispersion fading, dB (positive = loss).
pub fn dispersion_penalty_db(rf_hz: f64, wavelength_nm: f64, fiber: &FiberParams) -> f64 {
    -20.0 * dispersion_factor(rf_hz, wavelength_nm, fiber).abs().log10()
}

/// Fiber length of the first fading null at `rf_hz`, km.
pub fn first_null_length_km(rf_hz: f64, wavelength_nm: f64, dispersion_ps_nm_km: f64) -> f64 {
    let unit = FiberParams {
        length_km: 1.0,
        dispersion_ps_nm_km,
        ..FiberParams::default()
    };
    std::f64::consts::FRAC_PI_2 / dispersion_phase(rf_hz, wavelength_nm, &unit)
}

/// Envelopes narrower than this fraction of their carrier get the fading
/// factor at the carrier only.
pub const NARROWBAND_FRACTION: f64 = 0.05;

/// Attenuation plus per-bin dispersion fading of the RF envelope.
pub fn fiber_propagate<T: Real>(
    sig: &OpticalSignal<T>,
    fiber: &FiberParams,
) -> Result<OpticalSignal<T>> {
    fiber.validate("fiber")?;
    let mut out = sig.clone();
    out.avg_power_dbm -= fiber.loss_db();
    if fiber.length_km == 0.0 || fiber.dispersion_ps_nm_km == 0.0 {
        return Ok(out);
    }
    let env = &sig.envelope;
    let narrowband = env.sample_rate_hz() < NARROWBAND_FRACTION * env.envelope_ref_hz();
    out.envelope = if narrowband {
        let k = dispersion_factor(env.envelope_ref_hz(), sig.wavelength_nm, fiber);
        env.scaled(Complex::new(T::lit(k), T::zero()))
    } else {
        apply_frequency_response(env, |f| dispersion_factor(f, sig.wavelength_nm, fiber))?
    };
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct EdfaParams {
    pub gain_db: f64,
    pub nf_db: f64,
}

impl Default for EdfaParams {
    fn default() -> Self {
        Self {
            gain_db: 6.0,
            nf_db: 5.0,
        }
    }
}

/// OSNR contributed by one amplifier with input power `p_in_w`:
/// `P_in / (NF·h·ν·B_ref)`.
pub fn amplifier_osnr(p_in_w: f64, nf_db: f64, wavelength_nm: f64) -> f64 {
    p_in_w
        / (db_to_lin(nf_db) * PLANCK * optical_frequency_hz(wavelength_nm) * OSNR_REF_BANDWIDTH_HZ)
}

/// Reciprocal-sum OSNR cascade.
pub fn cascade_osnr(a: f64, b: f64) -> f64 {
    1.0 / (1.0 / a + 1.0 / b)
}

pub fn edfa_amplify<T: Real>(
    sig: &OpticalSignal<T>,
    gain_db: f64,
    nf_db: f64,
) -> Result<OpticalSignal<T>> {
    if !(gain_db >= 0.0) {
        return Err(contract(format!(
            "EDFA gain must be non-negative, got {gain_db}"
        )));
    }
    if !(nf_db >= 0.0) {
        return Err(contract(format!(
            "EDFA noise figure must be non-negative, got {nf_db}"
        )));
    }
    let stage = amplifier_osnr(sig.avg_power_w(), nf_db, sig.wavelength_nm);
    let mut out = sig.clone();
    out.avg_power_dbm += gain_db;
    out.osnr_linear = cascade_osnr(sig.osnr_linear, stage);
    Ok(out)
}

/// One circulator port-to-port pass; isolation is ideal.
pub fn circulator_pass<T: Real>(
    sig: &OpticalSignal<T>,
    insertion_loss_db: f64,
) -> Result<OpticalSignal<T>> {
    if !(insertion_loss_db >= 0.0) {
        return Err(contract(format!(
            "circulator insertion loss must be non-negative, got {insertion_loss_db}"
        )));
    }
    let mut out = sig.clone();
    out.avg_power_dbm -= insertion_loss_db;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct PdParams {
    pub responsivity_a_w: f64,
    pub bandwidth_hz: f64,
    pub load_ohm: f64,
    pub temperature_k: f64,
}

impl Default for PdParams {
    fn default() -> Self {
        Self {
            responsivity_a_w: 0.6,
            bandwidth_hz: 43e9,
            load_ohm: 50.0,
            temperature_k: 290.0,
        }
    }
}

impl PdParams {
    pub fn validate(&self, name: &str, wavelength_nm: f64) -> Result<()> {
        check_responsivity(name, self.responsivity_a_w, wavelength_nm)?;
        if !(self.bandwidth_hz > 0.0 && self.load_ohm > 0.0 && self.temperature_k > 0.0) {
            return Err(config(format!(
                "{name}: bandwidth, load and temperature must be positive"
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_responsivity(name: &str, r: f64, wavelength_nm: f64) -> Result<()> {
    let limit = quantum_limit_responsivity(wavelength_nm);
    if !(r > 0.0) {
        return Err(config(format!("{name}: responsivity must be positive")));
    }
    if r > limit {
        return Err(config(format!(
            "{name}: responsivity {r} A/W exceeds the quantum limit {limit:.3} A/W at {wavelength_nm} nm"
        )));
    }
    Ok(())
}

/// Which detection noise terms are drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorNoise {
    pub shot: bool,
    pub thermal: bool,
    pub ase_beat: bool,
    pub rin: bool,
    /// Extra white noise density at the detector output, W/Hz.
    pub excess_density_w_hz: f64,
}

impl DetectorNoise {
    pub fn physical(excess_density_w_hz: f64) -> Self {
        Self {
            shot: true,
            thermal: true,
            ase_beat: true,
            rin: true,
            excess_density_w_hz,
        }
    }

    pub fn disabled() -> Self {
        Self {
            shot: false,
            thermal: false,
            ase_beat: false,
            rin: false,
            excess_density_w_hz: 0.0,
        }
    }
}

/// `2·q·I_dc·B·R_load`.
pub fn shot_noise_power(i_dc_a: f64, bandwidth_hz: f64, load_ohm: f64) -> f64 {
    2.0 * ELEMENTARY_CHARGE * i_dc_a * bandwidth_hz * load_ohm
}

/// `4·k·T·B`.
pub fn thermal_noise_power(temperature_k: f64, bandwidth_hz: f64) -> f64 {
    4.0 * BOLTZMANN * temperature_k * bandwidth_hz
}

/// `RIN·I_dc²·B·R_load`.
pub fn rin_noise_power(rin_db_hz: f64, i_dc_a: f64, bandwidth_hz: f64, load_ohm: f64) -> f64 {
    db_to_lin(rin_db_hz) * i_dc_a * i_dc_a * bandwidth_hz * load_ohm
}

/// Signal-spontaneous beat noise `2·R²·P_s·P_ase·B/B_ref·R_load`, where
/// `P_ase = P_s/OSNR` in the reference bandwidth.
pub fn signal_ase_beat_power(
    responsivity_a_w: f64,
    p_signal_w: f64,
    osnr_linear: f64,
    bandwidth_hz: f64,
    load_ohm: f64,
) -> f64 {
    if !osnr_linear.is_finite() {
        return 0.0;
    }
    let p_ase = p_signal_w / osnr_linear;
    2.0 * responsivity_a_w.powi(2) * p_signal_w * p_ase * bandwidth_hz / OSNR_REF_BANDWIDTH_HZ
        * load_ohm
}

/// Input-referred added noise of an amplifier, `(F − 1)·k·T₀·B`.
pub fn amplifier_noise_power(nf_db: f64, bandwidth_hz: f64) -> f64 {
    (db_to_lin(nf_db) - 1.0) * BOLTZMANN * T0_KELVIN * bandwidth_hz
}

/// Front-end description shared by the PIN and the VCSEL detector.
#[derive(Debug, Clone, Copy)]
pub(crate) struct FrontEnd {
    pub responsivity_a_w: f64,
    pub load_ohm: f64,
    pub temperature_k: f64,
    pub bandwidth_hz: f64,
}

/// Output of a square-law detector.
#[derive(Debug, Clone)]
pub struct Detection<T: Real> {
    pub waveform: SampledWaveform<T>,
    pub dc_current_a: f64,
    /// Signal power at the detector output, W.
    pub signal_power_w: f64,
    /// Total added noise density, W/Hz.
    pub noise_density_w_hz: f64,
    pub diagnostics: Vec<Diagnostic>,
}

impl<T: Real> Detection<T> {
    /// Electrical SNR in a given noise bandwidth.
    pub fn snr(&self, bandwidth_hz: f64) -> f64 {
        self.signal_power_w / (self.noise_density_w_hz * bandwidth_hz)
    }
}

/// Detection noise density before any excess multiplier, W/Hz.
pub(crate) fn detection_noise_density<T: Real>(
    sig: &OpticalSignal<T>,
    fe: &FrontEnd,
    noise: &DetectorNoise,
) -> f64 {
    let p = sig.avg_power_w();
    let i_dc = fe.responsivity_a_w * p;
    let mut density = noise.excess_density_w_hz;
    if noise.shot {
        density += shot_noise_power(i_dc, 1.0, fe.load_ohm);
    }
    if noise.thermal {
        density += thermal_noise_power(fe.temperature_k, 1.0);
    }
    if noise.rin {
        if let Some(rin) = sig.rin_db_hz {
            density += rin_noise_power(rin, i_dc, 1.0, fe.load_ohm);
        }
    }
    if noise.ase_beat {
        density += signal_ase_beat_power(fe.responsivity_a_w, p, sig.osnr_linear, 1.0, fe.load_ohm);
    }
    density
}

pub(crate) fn detect<T: Real>(
    sig: &OpticalSignal<T>,
    fe: &FrontEnd,
    noise: &DetectorNoise,
    noise_scale: f64,
    stage: &str,
    rng: RngHandle,
) -> Result<Detection<T>> {
    let env = &sig.envelope;
    let mut diagnostics = Vec::new();
    let top = env.envelope_ref_hz() + env.sample_rate_hz() / 2.0;
    if top > fe.bandwidth_hz {
        diagnostics.push(Diagnostic::new(
            stage,
            format!(
                "signal extends to {:.3} GHz, beyond the {:.3} GHz detector bandwidth",
                top / 1e9,
                fe.bandwidth_hz / 1e9
            ),
        ));
    }
    let p = sig.avg_power_w();
    let i_dc = fe.responsivity_a_w * p;
    let amplitude = i_dc * sig.mod_index * fe.load_ohm.sqrt();
    let clean = env.scaled(Complex::new(T::lit(amplitude), T::zero()));
    let density = detection_noise_density(sig, fe, noise) * noise_scale;
    let waveform = add_awgn(&clean, density * env.sample_rate_hz(), rng)?;
    Ok(Detection {
        signal_power_w: amplitude * amplitude,
        waveform,
        dc_current_a: i_dc,
        noise_density_w_hz: density,
        diagnostics,
    })
}

/// PIN photodiode: photocurrent `R·P`, RF envelope `R·P·m`, plus shot,
/// thermal, RIN, signal-ASE beat and excess noise.
pub fn pin_detect<T: Real>(
    sig: &OpticalSignal<T>,
    pd: &PdParams,
    noise: &DetectorNoise,
    rng: RngHandle,
) -> Result<Detection<T>> {
    pd.validate("pin", sig.wavelength_nm)?;
    let fe = FrontEnd {
        responsivity_a_w: pd.responsivity_a_w,
        load_ohm: pd.load_ohm,
        temperature_k: pd.temperature_k,
        bandwidth_hz: pd.bandwidth_hz,
    };
    detect(sig, &fe, noise, 1.0, "pin", rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct RfAmpParams {
    pub gain_db: f64,
    pub nf_db: f64,
    pub band_lo_hz: f64,
    pub band_hi_hz: f64,
}

impl Default for RfAmpParams {
    fn default() -> Self {
        Self {
            gain_db: 24.0,
            nf_db: 1.9,
            band_lo_hz: 4.4e9,
            band_hi_hz: 5.4e9,
        }
    }
}

impl RfAmpParams {
    pub fn validate(&self, name: &str) -> Result<()> {
        if !(self.band_lo_hz < self.band_hi_hz) {
            return Err(config(format!(
                "{name}: band_lo_hz must be below band_hi_hz"
            )));
        }
        if !(self.nf_db >= 0.0) {
            return Err(config(format!("{name}: noise figure must be non-negative")));
        }
        Ok(())
    }

    /// First-order amplitude roll-off outside the band; the corner width is
    /// 5% of the bandwidth.
    pub fn response(&self, f_hz: f64) -> f64 {
        let w = 0.05 * (self.band_hi_hz - self.band_lo_hz);
        let d = if f_hz < self.band_lo_hz {
            self.band_lo_hz - f_hz
        } else if f_hz > self.band_hi_hz {
            f_hz - self.band_hi_hz
        } else {
            return 1.0;
        };
        1.0 / (1.0 + (d / w).powi(2)).sqrt()
    }
}

/// Gain, input-referred added noise, and band-edge roll-off.
pub fn rf_amplify<T: Real>(
    wf: &SampledWaveform<T>,
    amp: &RfAmpParams,
    add_noise: bool,
    rng: RngHandle,
) -> Result<SampledWaveform<T>> {
    amp.validate("amplifier")?;
    let noisy = if add_noise && amp.nf_db > 0.0 {
        add_awgn(
            wf,
            amplifier_noise_power(amp.nf_db, 1.0) * wf.sample_rate_hz(),
            rng,
        )?
    } else {
        wf.clone()
    };
    let g = T::lit(10f64.powf(amp.gain_db / 20.0));
    let amplified = noisy.scaled(Complex::new(g, T::zero()));
    apply_frequency_response(&amplified, |f| amp.response(f))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct BandpassParams {
    pub f_lo_hz: f64,
    pub f_hi_hz: f64,
}

impl Default for BandpassParams {
    fn default() -> Self {
        Self {
            f_lo_hz: 4.5e9,
            f_hi_hz: 5.5e9,
        }
    }
}

/// Brick-wall band with raised-cosine edges centered on `f_lo`/`f_hi`;
/// each edge is 5% of the bandwidth wide.
pub fn bandpass_response(f_hz: f64, f_lo_hz: f64, f_hi_hz: f64) -> f64 {
    let w = 0.05 * (f_hi_hz - f_lo_hz);
    let edge = |d: f64| {
        // d: distance past the edge, negative inside
        if d <= -w / 2.0 {
            1.0
        } else if d >= w / 2.0 {
            0.0
        } else {
            0.5 * (1.0 + (std::f64::consts::PI * (d + w / 2.0) / w).cos())
        }
    };
    edge(f_lo_hz - f_hz) * edge(f_hz - f_hi_hz)
}

pub fn bandpass<T: Real>(
    wf: &SampledWaveform<T>,
    f_lo_hz: f64,
    f_hi_hz: f64,
) -> Result<SampledWaveform<T>> {
    if !(f_lo_hz < f_hi_hz) {
        return Err(contract(format!(
            "bandpass edges out of order: {f_lo_hz} ≥ {f_hi_hz}"
        )));
    }
    let lo = wf.envelope_ref_hz() - wf.sample_rate_hz() / 2.0;
    let hi = wf.envelope_ref_hz() + wf.sample_rate_hz() / 2.0;
    if f_hi_hz <= lo || f_lo_hz >= hi {
        return Err(contract(format!(
            "bandpass {:.4}-{:.4} GHz misses the signal support {:.4}-{:.4} GHz",
            f_lo_hz / 1e9,
            f_hi_hz / 1e9,
            lo / 1e9,
            hi / 1e9
        )));
    }
    apply_frequency_response(wf, |f| bandpass_response(f, f_lo_hz, f_hi_hz))
}
