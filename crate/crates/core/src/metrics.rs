//! EVM, SNR and BER figures, threshold verdicts, constellation export.
//!
//! EVM is data-aided: the measured symbols are compared with the known
//! transmitted symbols after the recovery stage has removed the complex
//! gain of the chain. No equalization is applied.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{config, contract, Result};
use crate::modem::{bits_per_symbol, write_symbols_csv, SymbolStream};
use crate::num::Real;

/// Minimum stream length accepted by [`evm_rms`].
pub const MIN_EVM_SYMBOLS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

/// EVM limits per constellation order, in percent.
///
/// The 64-QAM limit is the one the experiment is measured against; the
/// 16-QAM and QPSK limits are the usual E-UTRA values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct EvmThresholds {
    pub qam64_percent: f64,
    pub qam16_percent: f64,
    pub qpsk_percent: f64,
}

impl Default for EvmThresholds {
    fn default() -> Self {
        Self {
            qam64_percent: 8.0,
            qam16_percent: 12.5,
            qpsk_percent: 17.5,
        }
    }
}

impl EvmThresholds {
    pub fn for_order(&self, order_m: u32) -> Result<f64> {
        match order_m {
            64 => Ok(self.qam64_percent),
            16 => Ok(self.qam16_percent),
            4 => Ok(self.qpsk_percent),
            _ => Err(config(format!("no EVM threshold for {order_m}-QAM"))),
        }
    }
}

/// Per-stream EVM summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvmReport {
    pub evm_rms_percent: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_symbol_evm: Vec<f64>,
    pub snr_estimate_db: f64,
    pub ber_estimate: f64,
    pub modulation_order: u32,
    pub verdict: Verdict,
    pub threshold_percent: f64,
    /// False when the threshold is a default table value rather than the
    /// experimentally anchored 64-QAM limit.
    pub threshold_anchored: bool,
    pub symbols: usize,
}

impl EvmReport {
    pub fn from_streams<T: Real>(
        measured: &SymbolStream<T>,
        reference: &SymbolStream<T>,
        thresholds: &EvmThresholds,
    ) -> Result<Self> {
        let per_symbol_evm = per_symbol_evm(measured, reference)?;
        let evm = evm_rms(measured, reference)?;
        Self::from_evm(evm, per_symbol_evm, reference.order_m, thresholds)
    }

    pub fn from_evm(
        evm_rms_percent: f64,
        per_symbol_evm: Vec<f64>,
        order_m: u32,
        thresholds: &EvmThresholds,
    ) -> Result<Self> {
        let threshold_percent = thresholds.for_order(order_m)?;
        let (snr_estimate_db, ber_estimate) = if evm_rms_percent > 0.0 {
            (
                snr_from_evm(evm_rms_percent)?,
                ber_estimate_from_evm(evm_rms_percent, order_m)?,
            )
        } else {
            (f64::INFINITY, 0.0)
        };
        let symbols = per_symbol_evm.len();
        Ok(Self {
            evm_rms_percent,
            per_symbol_evm,
            snr_estimate_db,
            ber_estimate,
            modulation_order: order_m,
            verdict: threshold_verdict_with(evm_rms_percent, threshold_percent),
            threshold_percent,
            threshold_anchored: order_m == 64,
            symbols,
        })
    }

    /// True when the stored verdict agrees with the stored EVM and limit.
    pub fn is_consistent(&self) -> bool {
        self.verdict == threshold_verdict_with(self.evm_rms_percent, self.threshold_percent)
    }
}

fn check_lengths<T: Real>(measured: &SymbolStream<T>, reference: &SymbolStream<T>) -> Result<()> {
    if measured.len() != reference.len() {
        return Err(contract(format!(
            "measured ({}) and reference ({}) lengths differ",
            measured.len(),
            reference.len()
        )));
    }
    if reference.len() < MIN_EVM_SYMBOLS {
        return Err(contract(format!(
            "EVM needs at least {MIN_EVM_SYMBOLS} symbols, got {}",
            reference.len()
        )));
    }
    Ok(())
}

/// RMS EVM in percent: `100·√(Σ|z−r|² / Σ|r|²)`.
pub fn evm_rms<T: Real>(measured: &SymbolStream<T>, reference: &SymbolStream<T>) -> Result<f64> {
    check_lengths(measured, reference)?;
    let (mut err, mut refp) = (0.0f64, 0.0f64);
    for (z, r) in measured.symbols.iter().zip(&reference.symbols) {
        err += (z - r).norm_sqr().to_f64_lossless();
        refp += r.norm_sqr().to_f64_lossless();
    }
    if refp <= 0.0 {
        return Err(contract("reference symbols carry no energy"));
    }
    Ok(100.0 * (err / refp).sqrt())
}

/// Per-symbol error magnitude in percent of the reference RMS amplitude.
/// Their RMS equals [`evm_rms`].
pub fn per_symbol_evm<T: Real>(
    measured: &SymbolStream<T>,
    reference: &SymbolStream<T>,
) -> Result<Vec<f64>> {
    check_lengths(measured, reference)?;
    let n = reference.len() as f64;
    let ref_rms = (reference
        .symbols
        .iter()
        .map(|r| r.norm_sqr().to_f64_lossless())
        .sum::<f64>()
        / n)
        .sqrt();
    if ref_rms <= 0.0 {
        return Err(contract("reference symbols carry no energy"));
    }
    Ok(measured
        .symbols
        .iter()
        .zip(&reference.symbols)
        .map(|(z, r)| 100.0 * (z - r).norm().to_f64_lossless() / ref_rms)
        .collect())
}

/// `SNR_dB = −20·log10(EVM/100)`.
pub fn snr_from_evm(evm_percent: f64) -> Result<f64> {
    if !(evm_percent > 0.0 && evm_percent.is_finite()) {
        return Err(contract(format!("EVM must be positive, got {evm_percent}")));
    }
    Ok(-20.0 * (evm_percent / 100.0).log10())
}

/// Inverse of [`snr_from_evm`].
pub fn evm_from_snr(snr_db: f64) -> f64 {
    100.0 * 10f64.powf(-snr_db / 20.0)
}

/// Gaussian tail probability.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Gray-coded square-QAM bit error rate at linear symbol SNR:
/// `(4/log2 M)(1 − 1/√M)·Q(√(3·SNR/(M−1)))`. Nearest-neighbour
/// approximation; tight at the error rates of interest here.
pub fn qam_ber(snr_linear: f64, order_m: u32) -> Result<f64> {
    let k = bits_per_symbol(order_m)? as f64;
    let m = order_m as f64;
    let ber =
        (4.0 / k) * (1.0 - 1.0 / m.sqrt()) * q_function((3.0 * snr_linear / (m - 1.0)).sqrt());
    Ok(ber.clamp(0.0, 1.0))
}

/// BER estimate from EVM, with `SNR = (100/EVM)²`.
pub fn ber_estimate_from_evm(evm_percent: f64, order_m: u32) -> Result<f64> {
    if !(evm_percent > 0.0) {
        return Err(contract(format!("EVM must be positive, got {evm_percent}")));
    }
    qam_ber((100.0 / evm_percent).powi(2), order_m)
}

fn threshold_verdict_with(evm_percent: f64, threshold: f64) -> Verdict {
    if evm_percent <= threshold {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

/// Pass iff `evm ≤ threshold(M)`; the boundary passes.
pub fn threshold_verdict(
    evm_percent: f64,
    order_m: u32,
    thresholds: &EvmThresholds,
) -> Result<Verdict> {
    Ok(threshold_verdict_with(
        evm_percent,
        thresholds.for_order(order_m)?,
    ))
}

#[derive(Serialize)]
struct ConstellationSidecar<'a> {
    symbols: usize,
    order_m: u32,
    csv: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    evm: Option<&'a EvmReport>,
}

/// Writes `path` as `index,i,q` CSV and a JSON sidecar next to it
/// (same stem, `.json`) carrying the EVM annotations.
pub fn constellation_export<T: Real>(
    symbols: &SymbolStream<T>,
    path: &Path,
    report: Option<&EvmReport>,
) -> Result<()> {
    write_symbols_csv(BufWriter::new(File::create(path)?), symbols)?;
    let stripped = report.map(|r| EvmReport {
        per_symbol_evm: Vec::new(),
        ..r.clone()
    });
    let sidecar = ConstellationSidecar {
        symbols: symbols.len(),
        order_m: symbols.order_m,
        csv: path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        evm: stripped.as_ref(),
    };
    let mut f = BufWriter::new(File::create(path.with_extension("json"))?);
    serde_json::to_writer_pretty(&mut f, &sidecar)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modem::{constellation, qam_map};
    use crate::signals::gaussian_pair;
    use num_complex::Complex;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symbols(n: usize, m: u32, seed: u64) -> SymbolStream<f64> {
        let k = bits_per_symbol(m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bits: Vec<bool> = (0..n * k).map(|_| rng.random()).collect();
        qam_map(&bits, m).unwrap()
    }

    fn with_noise(s: &SymbolStream<f64>, snr_db: f64, seed: u64) -> SymbolStream<f64> {
        let sigma = (10f64.powf(-snr_db / 10.0) / 2.0).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let symbols = s
            .symbols
            .iter()
            .map(|&x| {
                let (a, b) = gaussian_pair(&mut rng);
                x + Complex::new(a * sigma, b * sigma)
            })
            .collect();
        SymbolStream::new(symbols, s.order_m)
    }

    #[test]
    fn identical_streams_have_zero_evm() {
        let r = random_symbols(1000, 64, 1);
        assert_eq!(evm_rms(&r, &r).unwrap(), 0.0);
    }

    #[test]
    fn evm_at_30db() {
        let r = random_symbols(100_000, 64, 2);
        let z = with_noise(&r, 30.0, 3);
        let evm = evm_rms(&z, &r).unwrap();
        assert!((evm - 3.162).abs() < 0.05, "{evm}");
    }

    #[test]
    fn mismatched_or_short_streams_are_rejected() {
        let r = random_symbols(200, 16, 4);
        let short = SymbolStream::new(r.symbols[..150].to_vec(), 16);
        assert!(evm_rms(&short, &r).is_err());
        let tiny = SymbolStream::new(r.symbols[..50].to_vec(), 16);
        assert!(evm_rms(&tiny, &tiny).is_err());
    }

    #[test]
    fn snr_evm_identity() {
        assert!((snr_from_evm(3.2).unwrap() - 29.897).abs() < 0.01);
        assert!((snr_from_evm(4.3).unwrap() - 27.330).abs() < 0.01);
        assert!((snr_from_evm(8.0).unwrap() - 21.938).abs() < 0.01);
        for evm in [0.01, 1.0, 3.2, 17.0] {
            assert!((evm_from_snr(snr_from_evm(evm).unwrap()) - evm).abs() < 1e-12);
        }
        assert!(snr_from_evm(0.0).is_err());
        assert!(snr_from_evm(-1.0).is_err());
    }

    #[test]
    fn ber_estimates() {
        let at_threshold = ber_estimate_from_evm(8.0, 64).unwrap();
        assert!((at_threshold / 1.9e-3 - 1.0).abs() < 0.05, "{at_threshold}");
        assert!(ber_estimate_from_evm(3.2, 64).unwrap() < 1e-9);
        assert!(ber_estimate_from_evm(1e-3, 64).unwrap() < 1e-300);
    }

    #[test]
    fn verdicts() {
        let t = EvmThresholds::default();
        assert_eq!(threshold_verdict(7.9, 64, &t).unwrap(), Verdict::Pass);
        assert_eq!(threshold_verdict(8.1, 64, &t).unwrap(), Verdict::Fail);
        assert_eq!(threshold_verdict(8.0, 64, &t).unwrap(), Verdict::Pass);
        assert_eq!(threshold_verdict(12.0, 16, &t).unwrap(), Verdict::Pass);
        assert!(threshold_verdict(1.0, 32, &t).is_err());
    }

    #[test]
    fn per_symbol_rms_matches_total() {
        let r = random_symbols(5_000, 16, 5);
        let z = with_noise(&r, 20.0, 6);
        let per = per_symbol_evm(&z, &r).unwrap();
        let rms = (per.iter().map(|e| e * e).sum::<f64>() / per.len() as f64).sqrt();
        let total = evm_rms(&z, &r).unwrap();
        assert!((rms - total).abs() / total < 1e-9);
    }

    #[test]
    fn report_is_consistent() {
        let r = random_symbols(2_000, 64, 7);
        let z = with_noise(&r, 25.0, 8);
        let rep = EvmReport::from_streams(&z, &r, &EvmThresholds::default()).unwrap();
        assert!(rep.is_consistent());
        assert!(rep.threshold_anchored);
        assert_eq!(rep.symbols, 2_000);
        let json = serde_json::to_string(&rep).unwrap();
        assert!(json.contains("\"evm_rms_percent\""));
        assert!(json.contains("\"verdict\":\"pass\""));
    }

    #[test]
    fn export_writes_grid_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let c = constellation::<f64>(64).unwrap();
        constellation_export(&c, &path, None).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let rows: std::collections::BTreeSet<&str> = text
            .lines()
            .skip(1)
            .map(|l| l.split_once(',').unwrap().1)
            .collect();
        assert_eq!(rows.len(), 64);
        for row in &rows {
            let (i, q) = row.split_once(',').unwrap();
            for v in [i, q] {
                let level = v.parse::<f64>().unwrap() * 42f64.sqrt();
                assert!((level - level.round()).abs() < 1e-9 && level.round() as i64 % 2 != 0);
            }
        }
        assert!(dir.path().join("c.json").exists());
    }

    #[test]
    fn noisy_clusters_have_evm_radius() {
        let r = random_symbols(64_000, 64, 9);
        let z = with_noise(&r, 25.0, 10);
        let evm = evm_rms(&z, &r).unwrap() / 100.0;
        // RMS distance to the cluster center (the ideal point)
        let mut sums = std::collections::BTreeMap::<(i64, i64), (f64, usize)>::new();
        for (a, b) in z.symbols.iter().zip(&r.symbols) {
            let key = ((b.re * 1e6).round() as i64, (b.im * 1e6).round() as i64);
            let e = sums.entry(key).or_insert((0.0, 0));
            e.0 += (a - b).norm_sqr();
            e.1 += 1;
        }
        assert_eq!(sums.len(), 64);
        for (s, n) in sums.values() {
            let radius = (s / *n as f64).sqrt();
            assert!((radius / evm - 1.0).abs() < 0.1, "{radius} vs {evm}");
        }
    }

    #[test]
    fn empty_stream_exports_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        constellation_export(&SymbolStream::<f64>::new(vec![], 64), &path, None).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "index,i,q\n");
    }
}
