//! Injection-locked VCSEL acting as reflector and detector at once.
//!
//! The model is behavioral. Locking follows the usual square-root law
//! `Δf = κ·√(P_inj/P_out)`. The reflected output re-emits the injected
//! modulation unchanged, scaled by a net reflection gain. The detected
//! output behaves like a photodiode of the configured responsivity. Below a
//! reference injected power, a soft-knee penalty adds excess noise of
//! `k·(P_ref − P_inc)` dB.

use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::num::Real;
use crate::photonics::{
    check_responsivity, detect, Detection, DetectorNoise, FrontEnd, OpticalSignal,
};
use crate::signals::RngHandle;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct VcselParams {
    /// Forward bias current; zero or negative is rejected.
    pub bias_ma: f64,
    /// Detuning of the free-running VCSEL from the master laser.
    pub free_running_offset_ghz: f64,
    /// Locking half-range at unity injection ratio.
    pub locking_coeff_ghz: f64,
    pub detector_responsivity_a_w: f64,
    /// Net gain of the reflected path.
    pub reflection_gain_db: f64,
    pub detector_bandwidth_hz: f64,
    /// Injected power at and above which there is no injection penalty.
    pub injection_ref_dbm: f64,
    pub injection_penalty_db_per_db: f64,
    /// Emitted power of the free-running slave, the denominator of the
    /// injection ratio.
    pub free_running_power_dbm: f64,
    pub load_ohm: f64,
}

impl Default for VcselParams {
    fn default() -> Self {
        Self {
            bias_ma: 8.0,
            free_running_offset_ghz: 2.0,
            locking_coeff_ghz: 10.0,
            detector_responsivity_a_w: 0.3,
            reflection_gain_db: -3.0,
            detector_bandwidth_hz: 10e9,
            injection_ref_dbm: 3.2,
            injection_penalty_db_per_db: 0.5,
            free_running_power_dbm: 2.0,
            load_ohm: 50.0,
        }
    }
}

impl VcselParams {
    /// Checks every invariant, forward bias first.
    pub fn validate(&self) -> Result<()> {
        if !(self.bias_ma > 0.0) {
            return Err(config(format!(
                "vcsel.bias_ma = {} mA: the VCSEL must stay forward biased (bias_ma > 0) to transmit and detect at once",
                self.bias_ma
            )));
        }
        if !(self.locking_coeff_ghz > 0.0) {
            return Err(config("vcsel.locking_coeff_ghz must be positive"));
        }
        if !(self.detector_bandwidth_hz > 0.0 && self.load_ohm > 0.0) {
            return Err(config(
                "vcsel.detector_bandwidth_hz and vcsel.load_ohm must be positive",
            ));
        }
        if !(self.injection_penalty_db_per_db >= 0.0) {
            return Err(config(
                "vcsel.injection_penalty_db_per_db must be non-negative",
            ));
        }
        if !(self.detector_responsivity_a_w > 0.0) {
            return Err(config("vcsel.detector_responsivity_a_w must be positive"));
        }
        Ok(())
    }

    /// Validates against the operating wavelength as well.
    pub fn validate_at(&self, wavelength_nm: f64) -> Result<()> {
        self.validate()?;
        check_responsivity("vcsel", self.detector_responsivity_a_w, wavelength_nm)
    }

    /// Extra detection noise, dB, at a given incident power.
    pub fn injection_penalty_db(&self, incident_dbm: f64) -> f64 {
        self.injection_penalty_db_per_db * (self.injection_ref_dbm - incident_dbm).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LockState {
    pub locked: bool,
    /// Half-range minus |detuning|; negative when unlocked.
    pub margin_ghz: f64,
    pub injection_ratio_db: f64,
}

/// Locking state for an injected power against the slave's own output.
///
/// Half-range is `locking_coeff·10^(ratio_db/20)`; the slave is locked
/// while its free-running detuning fits within it.
pub fn lock_state(
    injected_power_dbm: f64,
    vcsel_output_power_dbm: f64,
    params: &VcselParams,
) -> LockState {
    let ratio_db = injected_power_dbm - vcsel_output_power_dbm;
    let half_range = params.locking_coeff_ghz * 10f64.powf(ratio_db / 20.0);
    let margin = half_range - params.free_running_offset_ghz.abs();
    LockState {
        locked: margin >= 0.0,
        margin_ghz: margin,
        injection_ratio_db: ratio_db,
    }
}

/// Outputs of one injection event.
#[derive(Debug, Clone)]
pub struct Transaction<T: Real> {
    pub reflected: OpticalSignal<T>,
    pub detected: Detection<T>,
    pub lock: LockState,
    pub penalty_db: f64,
}

/// Reflects and detects `incident` in one step.
///
/// Fails with [`Error::Lock`] when the slave is not locked. `penalty`
/// switches the injection penalty on or off independently of the other
/// noise terms.
pub fn transact<T: Real>(
    incident: &OpticalSignal<T>,
    params: &VcselParams,
    noise: &DetectorNoise,
    penalty: bool,
    rng: RngHandle,
) -> Result<Transaction<T>> {
    params.validate_at(incident.wavelength_nm)?;
    let lock = lock_state(
        incident.avg_power_dbm,
        params.free_running_power_dbm,
        params,
    );
    if !lock.locked {
        return Err(Error::Lock {
            stage: "oil_vcsel".into(),
            state: lock,
        });
    }
    let mut reflected = incident.clone();
    reflected.avg_power_dbm += params.reflection_gain_db;

    let penalty_db = if penalty {
        params.injection_penalty_db(incident.avg_power_dbm)
    } else {
        0.0
    };
    let fe = FrontEnd {
        responsivity_a_w: params.detector_responsivity_a_w,
        load_ohm: params.load_ohm,
        temperature_k: 290.0,
        bandwidth_hz: params.detector_bandwidth_hz,
    };
    let detected = detect(
        incident,
        &fe,
        noise,
        10f64.powf(penalty_db / 10.0),
        "oil_vcsel",
        rng,
    )?;
    Ok(Transaction {
        reflected,
        detected,
        lock,
        penalty_db,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::SampledWaveform;
    use num_complex::Complex;
    use proptest::prelude::*;

    fn incident(power_dbm: f64) -> OpticalSignal<f64> {
        let s = (0..64)
            .map(|k| Complex::from_polar(1.0, 0.3 * k as f64))
            .collect();
        OpticalSignal {
            avg_power_dbm: power_dbm,
            wavelength_nm: 1559.8,
            mod_index: 0.4,
            envelope: SampledWaveform::new(s, 1e9, 5e9).unwrap(),
            osnr_linear: f64::INFINITY,
            rin_db_hz: None,
        }
    }

    #[test]
    fn defaults_valid() {
        VcselParams::default().validate_at(1559.8).unwrap();
    }

    #[test]
    fn reverse_bias_rejected() {
        for bias in [0.0, -1.0, f64::NAN] {
            let p = VcselParams {
                bias_ma: bias,
                ..VcselParams::default()
            };
            let err = p.validate().unwrap_err().to_string();
            assert!(err.contains("forward"), "{err}");
            assert!(transact(
                &incident(3.0),
                &p,
                &DetectorNoise::disabled(),
                true,
                RngHandle::new(0, 1)
            )
            .is_err());
        }
    }

    #[test]
    fn zero_detuning_locks() {
        let p = VcselParams {
            free_running_offset_ghz: 0.0,
            ..VcselParams::default()
        };
        let s = lock_state(-10.0, 2.0, &p);
        assert!(s.locked);
        let half = 10.0 * 10f64.powf(-12.0 / 20.0);
        assert!((s.margin_ghz - half).abs() < 1e-12);
    }

    #[test]
    fn weak_injection_unlocks() {
        let s = lock_state(-18.0, 2.0, &VcselParams::default());
        assert!((s.injection_ratio_db + 20.0).abs() < 1e-12);
        assert!(!s.locked);
        assert!((s.margin_ghz + 1.0).abs() < 1e-12);
    }

    #[test]
    fn twenty_db_scales_range_tenfold() {
        let p = VcselParams {
            free_running_offset_ghz: 0.0,
            ..VcselParams::default()
        };
        let a = lock_state(-10.0, 0.0, &p).margin_ghz;
        let b = lock_state(10.0, 0.0, &p).margin_ghz;
        assert!((b / a - 10.0).abs() < 1e-12);
    }

    #[test]
    fn unlocked_transact_reports_state() {
        match transact(
            &incident(-30.0),
            &VcselParams::default(),
            &DetectorNoise::disabled(),
            true,
            RngHandle::new(0, 1),
        ) {
            Err(Error::Lock { state, .. }) => assert!(!state.locked && state.margin_ghz < 0.0),
            other => panic!("expected lock error, got {other:?}"),
        }
    }

    #[test]
    fn transparent_reflection() {
        let p = VcselParams {
            reflection_gain_db: 0.0,
            ..VcselParams::default()
        };
        let inc = incident(3.2);
        let t = transact(
            &inc,
            &p,
            &DetectorNoise::physical(1e-17),
            true,
            RngHandle::new(0, 1),
        )
        .unwrap();
        assert_eq!(t.reflected, inc);
        let q = transact(
            &inc,
            &VcselParams::default(),
            &DetectorNoise::disabled(),
            true,
            RngHandle::new(0, 1),
        )
        .unwrap();
        assert!((q.reflected.avg_power_dbm - 0.2).abs() < 1e-12);
        assert_eq!(q.reflected.envelope, inc.envelope);
    }

    #[test]
    fn no_penalty_above_reference() {
        let p = VcselParams::default();
        let noise = DetectorNoise::physical(1e-17);
        let t = transact(&incident(4.0), &p, &noise, true, RngHandle::new(0, 1)).unwrap();
        assert_eq!(t.penalty_db, 0.0);
        let fe = FrontEnd {
            responsivity_a_w: 0.3,
            load_ohm: 50.0,
            temperature_k: 290.0,
            bandwidth_hz: 10e9,
        };
        let plain = detect(&incident(4.0), &fe, &noise, 1.0, "pd", RngHandle::new(0, 1)).unwrap();
        assert_eq!(t.detected.waveform, plain.waveform);
        assert!((t.detected.dc_current_a - 0.3 * 10f64.powf(0.4) * 1e-3).abs() < 1e-15);
    }

    #[test]
    fn penalty_scales_noise_density() {
        let p = VcselParams::default();
        let noise = DetectorNoise::physical(1e-17);
        let on = transact(
            &incident(p.injection_ref_dbm - 6.0),
            &p,
            &noise,
            true,
            RngHandle::new(0, 1),
        )
        .unwrap();
        let off = transact(
            &incident(p.injection_ref_dbm - 6.0),
            &p,
            &noise,
            false,
            RngHandle::new(0, 1),
        )
        .unwrap();
        assert!((on.penalty_db - 3.0).abs() < 1e-12);
        let ratio = on.detected.noise_density_w_hz / off.detected.noise_density_w_hz;
        assert!((10.0 * ratio.log10() - 3.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn margin_monotone_in_power(a in -30.0f64..10.0, d in 0.0f64..20.0, off in -5.0f64..5.0) {
            let p = VcselParams { free_running_offset_ghz: off, ..VcselParams::default() };
            prop_assert!(lock_state(a + d, 2.0, &p).margin_ghz >= lock_state(a, 2.0, &p).margin_ghz);
        }

        #[test]
        fn margin_monotone_in_detuning(pw in -30.0f64..10.0, off in 0.0f64..5.0, d in 0.0f64..5.0, sign in any::<bool>()) {
            let s = if sign { 1.0 } else { -1.0 };
            let near = VcselParams { free_running_offset_ghz: s * off, ..VcselParams::default() };
            let far = VcselParams { free_running_offset_ghz: s * (off + d), ..VcselParams::default() };
            prop_assert!(lock_state(pw, 2.0, &far).margin_ghz <= lock_state(pw, 2.0, &near).margin_ghz);
        }

        #[test]
        fn locked_iff_margin_nonnegative(pw in -40.0f64..10.0, off in -10.0f64..10.0) {
            let p = VcselParams { free_running_offset_ghz: off, ..VcselParams::default() };
            let s = lock_state(pw, 2.0, &p);
            prop_assert_eq!(s.locked, s.margin_ghz >= 0.0);
        }
    }
}
