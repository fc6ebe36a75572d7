use num_complex::Complex;

use crate::error::{contract, Result};
use crate::num::Real;

/// Complex envelope sampled at a fixed rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledWaveform<T: Real> {
    samples: Vec<Complex<T>>,
    sample_rate_hz: f64,
    envelope_ref_hz: f64,
}

impl<T: Real> SampledWaveform<T> {
    pub fn new(
        samples: Vec<Complex<T>>,
        sample_rate_hz: f64,
        envelope_ref_hz: f64,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(contract("waveform must hold at least one sample"));
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(contract(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if !(envelope_ref_hz.is_finite() && envelope_ref_hz >= 0.0) {
            return Err(contract(format!(
                "envelope reference frequency must be non-negative, got {envelope_ref_hz}"
            )));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
            envelope_ref_hz,
        })
    }

    /// All-zero waveform of `len` samples.
    pub fn zeros(len: usize, sample_rate_hz: f64, envelope_ref_hz: f64) -> Result<Self> {
        Self::new(
            vec![Complex::new(T::zero(), T::zero()); len],
            sample_rate_hz,
            envelope_ref_hz,
        )
    }

    /// Same timing metadata, new samples.
    pub fn with_samples(&self, samples: Vec<Complex<T>>) -> Result<Self> {
        Self::new(samples, self.sample_rate_hz, self.envelope_ref_hz)
    }

    pub fn samples(&self) -> &[Complex<T>] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex<T>> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn envelope_ref_hz(&self) -> f64 {
        self.envelope_ref_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Always false; kept for API symmetry with slices.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean `|x|²` in watts.
    pub fn power(&self) -> T {
        // non-empty by construction
        mean_power(&self.samples).unwrap_or_else(|_| T::zero())
    }

    /// Multiplies every sample by a complex gain.
    pub fn scaled(&self, gain: Complex<T>) -> Self {
        Self {
            samples: self.samples.iter().map(|&s| s * gain).collect(),
            sample_rate_hz: self.sample_rate_hz,
            envelope_ref_hz: self.envelope_ref_hz,
        }
    }

    /// Sample-wise sum; lengths and timing must match.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.len() != other.len() || self.sample_rate_hz != other.sample_rate_hz {
            return Err(contract("waveforms differ in length or sample rate"));
        }
        Ok(Self {
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(&a, &b)| a + b)
                .collect(),
            sample_rate_hz: self.sample_rate_hz,
            envelope_ref_hz: self.envelope_ref_hz,
        })
    }

    pub fn all_finite(&self) -> bool {
        self.samples
            .iter()
            .all(|s| s.re.is_finite() && s.im.is_finite())
    }

    /// Converts the sample type.
    pub fn cast<U: Real>(&self) -> SampledWaveform<U> {
        SampledWaveform {
            samples: self
                .samples
                .iter()
                .map(|s| {
                    Complex::new(
                        U::lit(s.re.to_f64_lossless()),
                        U::lit(s.im.to_f64_lossless()),
                    )
                })
                .collect(),
            sample_rate_hz: self.sample_rate_hz,
            envelope_ref_hz: self.envelope_ref_hz,
        }
    }
}

/// Mean `|x|²` of a waveform, in watts.
pub fn power<T: Real>(wf: &SampledWaveform<T>) -> T {
    wf.power()
}

/// Mean `|x|²` of a sample slice; accumulates in `f64`.
pub fn mean_power<T: Real>(samples: &[Complex<T>]) -> Result<T> {
    if samples.is_empty() {
        return Err(contract("power of an empty sample sequence"));
    }
    let sum: f64 = samples.iter().map(|s| s.norm_sqr().to_f64_lossless()).sum();
    Ok(T::lit(sum / samples.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_constant_has_unit_power() {
        let wf = SampledWaveform::<f64>::new(vec![Complex::new(1.0, 0.0); 64], 1e6, 0.0).unwrap();
        assert_eq!(wf.power(), 1.0);
    }

    #[test]
    fn zeros_have_zero_power() {
        let wf = SampledWaveform::<f32>::zeros(17, 1e6, 5e9).unwrap();
        assert_eq!(power(&wf), 0.0);
    }

    #[test]
    fn empty_is_rejected() {
        assert!(SampledWaveform::<f64>::new(vec![], 1e6, 0.0).is_err());
        assert!(mean_power::<f64>(&[]).is_err());
    }

    #[test]
    fn bad_rates_are_rejected() {
        let s = vec![Complex::new(0.0f64, 0.0)];
        assert!(SampledWaveform::new(s.clone(), 0.0, 0.0).is_err());
        assert!(SampledWaveform::new(s.clone(), f64::NAN, 0.0).is_err());
        assert!(SampledWaveform::new(s, 1.0, -1.0).is_err());
    }

    #[test]
    fn cast_preserves_values() {
        let wf = SampledWaveform::<f64>::new(vec![Complex::new(0.5, -0.25)], 2.0, 1.0).unwrap();
        let w32: SampledWaveform<f32> = wf.cast();
        assert_eq!(w32.samples()[0], Complex::new(0.5f32, -0.25));
        assert_eq!(w32.envelope_ref_hz(), 1.0);
    }
}
