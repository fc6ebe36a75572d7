//! Square QAM over root-raised-cosine pulses.
//!
//! # Bit mapping
//!
//! A symbol of `M`-QAM carries `k = log2 M` bits, taken MSB first. The
//! first `k/2` bits select the in-phase level and the last `k/2` the
//! quadrature level. Each half is a Gray label `g`; the level index is
//! `n = gray⁻¹(g)` counted from the most negative level, and the level is
//! `2n − (√M − 1)`. Levels are divided by `√(2(M−1)/3)` so the full
//! constellation has unit mean energy.
//!
//! For 64-QAM the in-phase labels from the most negative level upward are
//! `000 001 011 010 110 111 101 100`.
//!
//! The demapper slices each axis to the nearest level. A sample exactly
//! halfway between two levels goes to the level whose Gray label is
//! numerically lower.

use std::io::Write;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{config, contract, Diagnostic, Result};
use crate::num::Real;
use crate::signals::{correlate_at, SampledWaveform};

/// Modem parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ModemConfig {
    /// Constellation size: 4, 16 or 64.
    pub order_m: u32,
    pub symbol_rate_hz: f64,
    /// Root-raised-cosine roll-off in (0, 1].
    pub rolloff: f64,
    pub samples_per_symbol: usize,
    pub rrc_span_symbols: usize,
    /// RF subcarrier carried as the envelope reference frequency.
    pub rf_subcarrier_hz: f64,
}

impl Default for ModemConfig {
    fn default() -> Self {
        Self {
            order_m: 64,
            symbol_rate_hz: 560e6 / 6.0,
            rolloff: 0.35,
            samples_per_symbol: 10,
            rrc_span_symbols: 40,
            rf_subcarrier_hz: 5e9,
        }
    }
}

impl ModemConfig {
    pub fn validate(&self) -> Result<()> {
        bits_per_symbol(self.order_m)?;
        if !(self.symbol_rate_hz.is_finite() && self.symbol_rate_hz > 0.0) {
            return Err(config("modem.symbol_rate_hz must be positive"));
        }
        if !(self.rolloff > 0.0 && self.rolloff <= 1.0) {
            return Err(config("modem.rolloff must lie in (0, 1]"));
        }
        if self.samples_per_symbol < 2 {
            return Err(config("modem.samples_per_symbol must be at least 2"));
        }
        if self.rrc_span_symbols < 4 {
            return Err(config("modem.rrc_span_symbols must be at least 4"));
        }
        if !(self.rrc_span_symbols * self.samples_per_symbol).is_multiple_of(2) {
            return Err(config(
                "modem.rrc_span_symbols × samples_per_symbol must be even",
            ));
        }
        if self.occupied_bandwidth_hz() > self.sample_rate_hz() {
            return Err(config("modem occupied bandwidth exceeds the sample rate"));
        }
        if !(self.rf_subcarrier_hz.is_finite() && self.rf_subcarrier_hz >= 0.0) {
            return Err(config("modem.rf_subcarrier_hz must be non-negative"));
        }
        Ok(())
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.symbol_rate_hz * self.samples_per_symbol as f64
    }

    /// `Rs·(1 + β)`.
    pub fn occupied_bandwidth_hz(&self) -> f64 {
        self.symbol_rate_hz * (1.0 + self.rolloff)
    }

    /// Noise bandwidth of the matched filter, equal to the symbol rate.
    pub fn noise_bandwidth_hz(&self) -> f64 {
        self.symbol_rate_hz
    }

    pub fn bit_rate_bps(&self) -> f64 {
        self.symbol_rate_hz * self.order_m.trailing_zeros() as f64
    }

    /// Group delay of one RRC filter, in samples.
    pub fn filter_delay_samples(&self) -> usize {
        self.rrc_span_symbols * self.samples_per_symbol / 2
    }

    /// Unit-energy RRC taps.
    pub fn rrc_taps(&self) -> Vec<f64> {
        rrc_taps(self.rolloff, self.samples_per_symbol, self.rrc_span_symbols)
    }

    /// Transmit taps, `√sps ×` the unit-energy RRC, so that unit-energy
    /// symbols produce a unit-power waveform.
    pub fn tx_taps(&self) -> Vec<f64> {
        let g = (self.samples_per_symbol as f64).sqrt();
        self.rrc_taps().into_iter().map(|h| h * g).collect()
    }
}

/// Symbols with their constellation order.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolStream<T: Real> {
    pub symbols: Vec<Complex<T>>,
    pub order_m: u32,
}

impl<T: Real> SymbolStream<T> {
    pub fn new(symbols: Vec<Complex<T>>, order_m: u32) -> Self {
        Self { symbols, order_m }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

pub fn bits_per_symbol(order_m: u32) -> Result<usize> {
    match order_m {
        4 | 16 | 64 => Ok(order_m.trailing_zeros() as usize),
        _ => Err(config(format!(
            "unsupported QAM order {order_m}; expected 4, 16 or 64"
        ))),
    }
}

/// `√(2(M−1)/3)`: divides integer levels to give unit mean energy.
pub fn constellation_scale(order_m: u32) -> f64 {
    (2.0 * (order_m as f64 - 1.0) / 3.0).sqrt()
}

fn gray(n: u32) -> u32 {
    n ^ (n >> 1)
}

fn gray_inverse(mut g: u32) -> u32 {
    let mut n = g;
    while g > 1 {
        g >>= 1;
        n ^= g;
    }
    n
}

fn bits_to_u32(bits: &[bool]) -> u32 {
    bits.iter().fold(0, |acc, &b| (acc << 1) | u32::from(b))
}

fn push_bits(out: &mut Vec<bool>, value: u32, width: usize) {
    for i in (0..width).rev() {
        out.push((value >> i) & 1 == 1);
    }
}

/// Maps bits to unit-energy Gray-coded QAM symbols.
pub fn qam_map<T: Real>(bits: &[bool], order_m: u32) -> Result<SymbolStream<T>> {
    let k = bits_per_symbol(order_m)?;
    if !bits.len().is_multiple_of(k) {
        return Err(contract(format!(
            "{} bits is not a multiple of {k} bits per symbol",
            bits.len()
        )));
    }
    let half = k / 2;
    let side = 1u32 << half;
    let offset = (side - 1) as f64;
    let inv_scale = 1.0 / constellation_scale(order_m);
    let level = |g: u32| (2.0 * gray_inverse(g) as f64 - offset) * inv_scale;
    let symbols = bits
        .chunks_exact(k)
        .map(|group| {
            let i = level(bits_to_u32(&group[..half]));
            let q = level(bits_to_u32(&group[half..]));
            Complex::new(T::lit(i), T::lit(q))
        })
        .collect();
    Ok(SymbolStream::new(symbols, order_m))
}

/// Level index nearest to `x` on one axis (see module docs for ties).
fn slice_axis(x: f64, order_m: u32) -> u32 {
    let side = 1u32 << (order_m.trailing_zeros() / 2);
    let max = (side - 1) as f64;
    let p = (x * constellation_scale(order_m) + max) / 2.0;
    if !p.is_finite() || p <= 0.0 {
        return 0;
    }
    if p >= max {
        return side - 1;
    }
    let lo = p.floor();
    let frac = p - lo;
    let lo = lo as u32;
    if frac > 0.5 {
        lo + 1
    } else if frac < 0.5 || gray(lo) < gray(lo + 1) {
        lo
    } else {
        lo + 1
    }
}

/// Hard-decision demapper. Panics only on an unsupported order.
pub fn qam_demap<T: Real>(symbols: &SymbolStream<T>) -> Result<Vec<bool>> {
    let k = bits_per_symbol(symbols.order_m)?;
    let half = k / 2;
    let mut bits = Vec::with_capacity(symbols.len() * k);
    for s in &symbols.symbols {
        push_bits(
            &mut bits,
            gray(slice_axis(s.re.to_f64_lossless(), symbols.order_m)),
            half,
        );
        push_bits(
            &mut bits,
            gray(slice_axis(s.im.to_f64_lossless(), symbols.order_m)),
            half,
        );
    }
    Ok(bits)
}

/// Nearest constellation point of every symbol.
pub fn slice_to_constellation<T: Real>(symbols: &[Complex<T>], order_m: u32) -> Vec<Complex<T>> {
    let side = 1u32 << (order_m.trailing_zeros() / 2);
    let offset = (side - 1) as f64;
    let inv = 1.0 / constellation_scale(order_m);
    let level = |n: u32| T::lit((2.0 * n as f64 - offset) * inv);
    symbols
        .iter()
        .map(|s| {
            Complex::new(
                level(slice_axis(s.re.to_f64_lossless(), order_m)),
                level(slice_axis(s.im.to_f64_lossless(), order_m)),
            )
        })
        .collect()
}

/// Every constellation point, in label order.
pub fn constellation<T: Real>(order_m: u32) -> Result<SymbolStream<T>> {
    let k = bits_per_symbol(order_m)?;
    let mut bits = Vec::with_capacity(order_m as usize * k);
    for label in 0..order_m {
        push_bits(&mut bits, label, k);
    }
    qam_map(&bits, order_m)
}

/// Unit-energy root-raised-cosine taps, `span·sps + 1` long.
pub fn rrc_taps(rolloff: f64, sps: usize, span: usize) -> Vec<f64> {
    use std::f64::consts::PI;
    let n = span * sps;
    let b = rolloff;
    let mut h: Vec<f64> = (0..=n)
        .map(|i| {
            let t = (i as f64 - n as f64 / 2.0) / sps as f64;
            if t.abs() < 1e-12 {
                1.0 - b + 4.0 * b / PI
            } else if (4.0 * b * t.abs() - 1.0).abs() < 1e-9 {
                b / 2f64.sqrt()
                    * ((1.0 + 2.0 / PI) * (PI / (4.0 * b)).sin()
                        + (1.0 - 2.0 / PI) * (PI / (4.0 * b)).cos())
            } else {
                ((PI * t * (1.0 - b)).sin() + 4.0 * b * t * (PI * t * (1.0 + b)).cos())
                    / (PI * t * (1.0 - (4.0 * b * t).powi(2)))
            }
        })
        .collect();
    let e: f64 = h.iter().map(|x| x * x).sum();
    let norm = e.sqrt();
    h.iter_mut().for_each(|x| *x /= norm);
    h
}

/// Fraction of the (long-span) RRC energy kept by a truncated filter.
pub fn rrc_energy_fraction(rolloff: f64, sps: usize, span: usize) -> f64 {
    let raw = |span: usize| -> Vec<f64> {
        // unnormalized: rescale by the t=0 tap of the normalized filter
        let h = rrc_taps(rolloff, sps, span);
        let c = h[h.len() / 2];
        h.into_iter().map(|x| x / c).collect()
    };
    let energy = |h: &[f64]| h.iter().map(|x| x * x).sum::<f64>();
    let reference = energy(&raw(span.max(256)));
    energy(&raw(span)) / reference
}

/// Output of [`pulse_shape`].
#[derive(Debug, Clone)]
pub struct ShapedWaveform<T: Real> {
    pub waveform: SampledWaveform<T>,
    /// Sample index of symbol 0's pulse peak.
    pub delay_samples: usize,
    pub diagnostics: Vec<Diagnostic>,
}

/// Upsamples and filters symbols with the transmit RRC.
///
/// The output holds the full convolution (`(n − 1)·sps + taps` samples)
/// and carries `rf_subcarrier_hz` as its envelope reference.
pub fn pulse_shape<T: Real>(
    symbols: &SymbolStream<T>,
    cfg: &ModemConfig,
) -> Result<ShapedWaveform<T>> {
    cfg.validate()?;
    if symbols.is_empty() {
        return Err(contract("cannot shape an empty symbol stream"));
    }
    let mut diagnostics = Vec::new();
    let kept = rrc_energy_fraction(cfg.rolloff, cfg.samples_per_symbol, cfg.rrc_span_symbols);
    if kept < 0.999 {
        diagnostics.push(Diagnostic::new(
            "pulse_shape",
            format!(
                "RRC span of {} symbols keeps only {:.4}% of the filter energy",
                cfg.rrc_span_symbols,
                100.0 * kept
            ),
        ));
    }
    let taps: Vec<T> = cfg.tx_taps().into_iter().map(T::lit).collect();
    let sps = cfg.samples_per_symbol;
    let len = (symbols.len() - 1) * sps + taps.len();
    let mut out = vec![Complex::new(T::zero(), T::zero()); len];
    for (k, &s) in symbols.symbols.iter().enumerate() {
        let base = k * sps;
        for (o, &g) in out[base..base + taps.len()].iter_mut().zip(&taps) {
            *o = *o + s * g;
        }
    }
    Ok(ShapedWaveform {
        waveform: SampledWaveform::new(out, cfg.sample_rate_hz(), cfg.rf_subcarrier_hz)?,
        delay_samples: cfg.filter_delay_samples(),
        diagnostics,
    })
}

/// Where the symbols sit in a received waveform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolTiming {
    /// Sample index of symbol 0's transmit-pulse peak.
    pub first_symbol_sample: usize,
    pub count: usize,
}

/// Matched-filter output at the symbol instants, scaled so that a clean
/// back-to-back chain returns the transmitted symbols.
pub fn matched_filter<T: Real>(
    wf: &SampledWaveform<T>,
    cfg: &ModemConfig,
    timing: &SymbolTiming,
) -> Vec<Complex<T>> {
    let inv = 1.0 / (cfg.samples_per_symbol as f64).sqrt();
    let taps: Vec<T> = cfg
        .rrc_taps()
        .into_iter()
        .map(|h| T::lit(h * inv))
        .collect();
    (0..timing.count)
        .map(|k| {
            let center = timing.first_symbol_sample + k * cfg.samples_per_symbol;
            correlate_at(wf.samples(), &taps, center as isize)
        })
        .collect()
}

fn inner<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<f64> {
    a.iter().zip(b).fold(Complex::new(0.0, 0.0), |acc, (x, y)| {
        let p = x.conj() * y;
        acc + Complex::new(p.re.to_f64_lossless(), p.im.to_f64_lossless())
    })
}

/// Least-squares complex gain `⟨ref, z⟩ / ⟨ref, ref⟩`.
pub fn ls_gain<T: Real>(reference: &[Complex<T>], z: &[Complex<T>]) -> Complex<f64> {
    inner(reference, z) / inner(reference, reference).re
}

fn divide<T: Real>(z: &[Complex<T>], g: Complex<f64>) -> Vec<Complex<T>> {
    let inv = Complex::new(1.0, 0.0) / g;
    let inv = Complex::new(T::lit(inv.re), T::lit(inv.im));
    z.iter().map(|&x| x * inv).collect()
}

/// Matched filter, symbol-instant sampling with the tracked delay, and
/// complex-gain normalization.
///
/// With a `reference` the gain is fitted against it (data-aided);
/// without one it is fitted against sliced decisions.
pub fn recover_symbols<T: Real>(
    wf: &SampledWaveform<T>,
    cfg: &ModemConfig,
    timing: Option<&SymbolTiming>,
    reference: Option<&SymbolStream<T>>,
) -> Result<SymbolStream<T>> {
    cfg.validate()?;
    let timing = timing.ok_or_else(|| contract("symbol recovery needs the tracked chain delay"))?;
    if let Some(r) = reference {
        if r.len() != timing.count {
            return Err(contract(format!(
                "reference has {} symbols, timing expects {}",
                r.len(),
                timing.count
            )));
        }
    }
    let z = matched_filter(wf, cfg, timing);
    let normalized = match reference {
        Some(r) => {
            let g = ls_gain(&r.symbols, &z);
            if g.norm() == 0.0 || !g.norm().is_finite() {
                return Err(contract("received symbols are orthogonal to the reference"));
            }
            divide(&z, g)
        }
        None => decision_directed(&z, cfg.order_m)?,
    };
    Ok(SymbolStream::new(normalized, cfg.order_m))
}

fn decision_directed<T: Real>(z: &[Complex<T>], order_m: u32) -> Result<Vec<Complex<T>>> {
    let p = crate::signals::mean_power(z)?.to_f64_lossless();
    if p <= 0.0 {
        return Err(contract("cannot normalize an all-zero symbol stream"));
    }
    // Square QAM has a negative real fourth moment, so arg Σz⁴ = 4·arg g + π
    // modulo a quarter turn; the candidate nearest zero is taken.
    let m4: Complex<f64> = z
        .iter()
        .map(|x| Complex::new(x.re.to_f64_lossless(), x.im.to_f64_lossless()).powi(4))
        .sum();
    let quarter = std::f64::consts::FRAC_PI_2;
    let phase = if m4.norm() > 0.0 {
        let raw = (m4.arg() - std::f64::consts::PI) / 4.0;
        raw - quarter * (raw / quarter).round()
    } else {
        0.0
    };
    let mut current = divide(z, Complex::from_polar(p.sqrt(), phase));
    let mut decisions = slice_to_constellation(&current, order_m);
    for _ in 0..20 {
        let g = ls_gain(&decisions, z);
        current = divide(z, g);
        let next = slice_to_constellation(&current, order_m);
        if next == decisions {
            break;
        }
        decisions = next;
    }
    Ok(current)
}

/// Writes `index,i,q` rows with a header.
pub fn write_symbols_csv<T: Real, W: Write>(mut out: W, symbols: &SymbolStream<T>) -> Result<()> {
    let mut text = String::from("index,i,q\n");
    for (k, s) in symbols.symbols.iter().enumerate() {
        text.push_str(&format!(
            "{k},{},{}\n",
            s.re.to_f64_lossless(),
            s.im.to_f64_lossless()
        ));
    }
    out.write_all(text.as_bytes())?;
    Ok(())
}
