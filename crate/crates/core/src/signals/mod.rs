//! Sampled complex-envelope signals, seeded noise, and spectrum estimation.
//!
//! A [`SampledWaveform`] holds the complex envelope of a narrowband RF
//! signal. The physical passband signal is `Re{x(t)·exp(j2π·f_ref·t)}`
//! where `f_ref` is [`SampledWaveform::envelope_ref_hz`]. Power bookkeeping
//! uses the envelope directly: `mean |x|²` is the signal power in watts.

mod filter;
mod iq;
mod noise;
mod psd;
mod waveform;

pub use filter::{apply_frequency_response, bin_frequencies, correlate_at};
pub use iq::{read_iq, write_iq, IQ_FORMAT_VERSION, IQ_MAGIC};
pub use noise::{add_awgn, gaussian_pair, RngHandle};
pub use psd::{psd_estimate, psd_estimate_with, PsdConfig, Spectrum, Window};
pub use waveform::{mean_power, power, SampledWaveform};
