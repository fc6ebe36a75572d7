use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SampledWaveform;
use crate::error::{contract, Result};
use crate::num::Real;

/// Key of one independent noise stream.
///
/// Every noise source in a scenario owns its own `stream_id`, so adding or
/// removing a source never shifts the samples drawn by another one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngHandle {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngHandle {
    pub const fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// ChaCha8 keyed by `seed`, positioned on stream `stream_id`.
    pub fn generator(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Two independent standard normal draws (Marsaglia polar method).
///
/// Uses `libm::log` rather than the platform math library so the streams
/// are bit-identical on every target.
pub fn gaussian_pair<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    loop {
        let u = 2.0 * rng.random::<f64>() - 1.0;
        let v = 2.0 * rng.random::<f64>() - 1.0;
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            let k = (-2.0 * libm::log(s) / s).sqrt();
            return (u * k, v * k);
        }
    }
}

/// Adds circularly-symmetric complex Gaussian noise of total variance
/// `noise_power_w` (half in each quadrature). The input is left untouched.
pub fn add_awgn<T: Real>(
    wf: &SampledWaveform<T>,
    noise_power_w: f64,
    rng: RngHandle,
) -> Result<SampledWaveform<T>> {
    if !(noise_power_w.is_finite() && noise_power_w >= 0.0) {
        return Err(contract(format!(
            "noise power must be non-negative, got {noise_power_w}"
        )));
    }
    if noise_power_w == 0.0 {
        return Ok(wf.clone());
    }
    let sigma = (noise_power_w / 2.0).sqrt();
    let mut gen = rng.generator();
    let samples = wf
        .samples()
        .iter()
        .map(|&s| {
            let (a, b) = gaussian_pair(&mut gen);
            s + Complex::new(T::lit(a * sigma), T::lit(b * sigma))
        })
        .collect();
    wf.with_samples(samples)
}
