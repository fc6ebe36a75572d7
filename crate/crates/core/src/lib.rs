//! Link-level simulator of a duplex radio-over-fiber fronthaul in which an
//! injection-locked VCSEL at the distributed unit both re-emits the
//! downlink toward the radio unit and detects it for uplink monitoring.
//!
//! Sample-level code is generic over [`Real`] (`f32` or `f64`); link-budget
//! quantities are plain `f64`. The aliases below fix the scalar.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod link;
pub mod metrics;
pub mod modem;
pub mod num;
pub mod oil_vcsel;
pub mod photonics;
pub mod signals;

pub use error::{Diagnostic, Error, Result};
pub use num::Real;

pub type Waveform = signals::SampledWaveform<f64>;
pub type Waveform32 = signals::SampledWaveform<f32>;
pub type Symbols = modem::SymbolStream<f64>;
pub type Symbols32 = modem::SymbolStream<f32>;
pub type Optical = photonics::OpticalSignal<f64>;
pub type Run = link::LinkRun<f64>;
pub type Run32 = link::LinkRun<f32>;
