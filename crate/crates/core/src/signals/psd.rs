use num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::SampledWaveform;
use crate::error::{contract, Result};
use crate::num::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Rectangular,
    Hann,
}

impl Window {
    fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            // periodic Hann
            Window::Hann => (0..n)
                .map(|k| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos())
                .collect(),
        }
    }
}

/// Averaged-periodogram settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsdConfig {
    pub segment_len: usize,
    pub overlap_fraction: f64,
    pub window: Window,
}

impl Default for PsdConfig {
    fn default() -> Self {
        Self {
            segment_len: 4096,
            overlap_fraction: 0.5,
            window: Window::Hann,
        }
    }
}

/// Two-sided power spectral density of a complex envelope.
///
/// Bins are ordered from `-fs/2` upward; `offset_hz` is relative to
/// `envelope_ref_hz`. Summing `density_w_hz · resolution_hz` over all bins
/// gives the waveform power.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    pub offset_hz: Vec<f64>,
    pub density_w_hz: Vec<f64>,
    pub resolution_hz: f64,
    pub envelope_ref_hz: f64,
    pub segments: usize,
}

impl Spectrum {
    pub fn integrated_power(&self) -> f64 {
        self.density_w_hz.iter().sum::<f64>() * self.resolution_hz
    }

    /// Power in bins whose offset lies in `[lo, hi]`.
    pub fn band_power(&self, lo_hz: f64, hi_hz: f64) -> f64 {
        self.offset_hz
            .iter()
            .zip(&self.density_w_hz)
            .filter(|(f, _)| **f >= lo_hz && **f <= hi_hz)
            .map(|(_, d)| d)
            .sum::<f64>()
            * self.resolution_hz
    }

    /// Index and offset of the strongest bin.
    pub fn peak(&self) -> (usize, f64) {
        let (idx, _) = self
            .density_w_hz
            .iter()
            .enumerate()
            .fold(
                (0, f64::MIN),
                |best, (i, &d)| if d > best.1 { (i, d) } else { best },
            );
        (idx, self.offset_hz[idx])
    }

    /// Width between the outermost bins within `level_db` of the peak
    /// density, searched over `[lo, hi]` (offsets).
    pub fn occupied_bandwidth(&self, level_db: f64, lo_hz: f64, hi_hz: f64) -> f64 {
        let in_range = |f: f64| f >= lo_hz && f <= hi_hz;
        let peak = self
            .offset_hz
            .iter()
            .zip(&self.density_w_hz)
            .filter(|(f, _)| in_range(**f))
            .map(|(_, d)| *d)
            .fold(0.0, f64::max);
        let floor = peak * 10f64.powf(-level_db.abs() / 10.0);
        let above: Vec<f64> = self
            .offset_hz
            .iter()
            .zip(&self.density_w_hz)
            .filter(|(f, d)| in_range(**f) && **d >= floor)
            .map(|(f, _)| *f)
            .collect();
        match (above.first(), above.last()) {
            (Some(a), Some(b)) => b - a + self.resolution_hz,
            _ => 0.0,
        }
    }

    /// Power-weighted mean offset within `[lo, hi]`.
    pub fn centroid(&self, lo_hz: f64, hi_hz: f64) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for (f, d) in self.offset_hz.iter().zip(&self.density_w_hz) {
            if *f >= lo_hz && *f <= hi_hz {
                num += f * d;
                den += d;
            }
        }
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    }
}

/// Hann-windowed averaged periodogram.
pub fn psd_estimate<T: Real>(
    wf: &SampledWaveform<T>,
    segment_len: usize,
    overlap_fraction: f64,
) -> Result<Spectrum> {
    psd_estimate_with(
        wf,
        &PsdConfig {
            segment_len,
            overlap_fraction,
            window: Window::Hann,
        },
    )
}

pub fn psd_estimate_with<T: Real>(wf: &SampledWaveform<T>, cfg: &PsdConfig) -> Result<Spectrum> {
    let n = cfg.segment_len;
    if n == 0 || n > wf.len() {
        return Err(contract(format!(
            "segment length {n} must be in 1..={} (waveform length)",
            wf.len()
        )));
    }
    if !(0.0..1.0).contains(&cfg.overlap_fraction) {
        return Err(contract(format!(
            "overlap fraction {} outside [0, 1)",
            cfg.overlap_fraction
        )));
    }
    let fs = wf.sample_rate_hz();
    let window = cfg.window.coefficients(n);
    let win_energy: f64 = window.iter().map(|w| w * w).sum();
    let step = (n - (n as f64 * cfg.overlap_fraction).round() as usize).max(1);

    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let mut acc = vec![0.0f64; n];
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    let mut segments = 0usize;
    let mut start = 0usize;
    let samples = wf.samples();
    while start + n <= samples.len() {
        for ((b, s), w) in buf.iter_mut().zip(&samples[start..start + n]).zip(&window) {
            *b = Complex::new(s.re.to_f64_lossless() * w, s.im.to_f64_lossless() * w);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        segments += 1;
        start += step;
    }

    let scale = 1.0 / (segments as f64 * fs * win_energy);
    let resolution_hz = fs / n as f64;
    // reorder to ascending frequency: bins ceil(n/2)..n are negative
    let half = n.div_ceil(2);
    let order = (half..n).chain(0..half);
    let mut offset_hz = Vec::with_capacity(n);
    let mut density_w_hz = Vec::with_capacity(n);
    for k in order {
        let f = if k >= half {
            k as f64 - n as f64
        } else {
            k as f64
        };
        offset_hz.push(f * resolution_hz);
        density_w_hz.push(acc[k] * scale);
    }
    Ok(Spectrum {
        offset_hz,
        density_w_hz,
        resolution_hz,
        envelope_ref_hz: wf.envelope_ref_hz(),
        segments,
    })
}
