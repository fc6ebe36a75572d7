use num_complex::Complex;
use rustfft::FftPlanner;

use super::SampledWaveform;
use crate::error::Result;
use crate::num::Real;

/// Absolute RF frequency of every FFT bin of an `n`-point envelope
/// transform, in FFT order.
pub fn bin_frequencies(n: usize, sample_rate_hz: f64, envelope_ref_hz: f64) -> Vec<f64> {
    let half = n.div_ceil(2);
    (0..n)
        .map(|k| {
            let idx = if k >= half {
                k as f64 - n as f64
            } else {
                k as f64
            };
            envelope_ref_hz + idx * sample_rate_hz / n as f64
        })
        .collect()
}

/// Applies a real, zero-phase frequency response to the envelope.
///
/// `response` receives the absolute RF frequency of each bin. When the
/// response is exactly 1 on every bin the input is returned unchanged.
pub fn apply_frequency_response<T, F>(
    wf: &SampledWaveform<T>,
    response: F,
) -> Result<SampledWaveform<T>>
where
    T: Real,
    F: Fn(f64) -> f64,
{
    let n = wf.len();
    let gains: Vec<f64> = bin_frequencies(n, wf.sample_rate_hz(), wf.envelope_ref_hz())
        .into_iter()
        .map(response)
        .collect();
    if gains.iter().all(|&g| g == 1.0) {
        return Ok(wf.clone());
    }
    let mut planner = FftPlanner::<T>::new();
    let mut buf = wf.samples().to_vec();
    planner.plan_fft_forward(n).process(&mut buf);
    let inv_n = 1.0 / n as f64;
    for (b, g) in buf.iter_mut().zip(&gains) {
        *b = *b * T::lit(g * inv_n);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    wf.with_samples(buf)
}

/// Correlates `samples` with real `taps` centered at sample `center`;
/// samples outside the waveform count as zero.
pub fn correlate_at<T: Real>(samples: &[Complex<T>], taps: &[T], center: isize) -> Complex<T> {
    let half = (taps.len() / 2) as isize;
    let mut acc = Complex::new(T::zero(), T::zero());
    for (j, &h) in taps.iter().enumerate() {
        let idx = center - half + j as isize;
        if idx >= 0 && (idx as usize) < samples.len() {
            acc = acc + samples[idx as usize] * h;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bins_map_to_absolute_frequency() {
        let f = bin_frequencies(4, 4.0, 100.0);
        assert_eq!(f, vec![100.0, 101.0, 98.0, 99.0]);
    }

    #[test]
    fn unity_response_is_identity() {
        let wf = SampledWaveform::<f64>::new(vec![Complex::new(1.0, 2.0); 8], 1.0, 0.0).unwrap();
        assert_eq!(apply_frequency_response(&wf, |_| 1.0).unwrap(), wf);
    }

    #[test]
    fn constant_gain_scales() {
        let samples = (0..16)
            .map(|k| Complex::new(k as f64, -(k as f64)))
            .collect();
        let wf = SampledWaveform::<f64>::new(samples, 1.0, 0.0).unwrap();
        let out = apply_frequency_response(&wf, |_| 0.5).unwrap();
        for (a, b) in out.samples().iter().zip(wf.samples()) {
            assert!((a - b * 0.5).norm() < 1e-12);
        }
    }
}
