use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rofsim::link::{qos_payload, run_default, DelayEntry, LinkBudget, Scenario};
use rofsim::metrics::{constellation_export, EvmReport};
use rofsim::oil_vcsel::LockState;
use rofsim::signals::{psd_estimate, write_iq, PsdConfig};
use rofsim::{Diagnostic, Error, Run, Waveform};
use serde::Serialize;

use crate::{load_scenario, write_json, Exit, RunFlags};

#[derive(Debug, Clone, Serialize)]
pub struct QosReport {
    pub sent: String,
    pub recovered: String,
    pub crc_ok: bool,
    pub delivered: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LockFailure {
    pub stage: String,
    pub margin_ghz: f64,
    pub injection_ratio_db: f64,
}

/// Contents of `run.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    /// `pass`, `fail` or `lock_error`.
    pub status: String,
    pub seed: u64,
    pub symbols: usize,
    pub of1_length_km: f64,
    pub downlink: Option<EvmReport>,
    pub uplink: Option<EvmReport>,
    pub qos: Option<QosReport>,
    pub lock_state: Option<LockState>,
    pub lock_error: Option<LockFailure>,
    pub delays: Vec<DelayEntry>,
    pub budget: Option<LinkBudget>,
    pub diagnostics: Vec<Diagnostic>,
    pub artifacts: Vec<String>,
    pub scenario: Scenario,
}

fn strip(r: &EvmReport) -> EvmReport {
    EvmReport {
        per_symbol_evm: Vec::new(),
        ..r.clone()
    }
}

fn write_psd(path: &Path, wf: &Waveform) -> rofsim::Result<()> {
    let cfg = PsdConfig::default();
    let segment = cfg.segment_len.min(wf.len());
    let spec = psd_estimate(wf, segment, cfg.overlap_fraction)?;
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "offset_hz,frequency_hz,density_w_hz")?;
    for (f, d) in spec.offset_hz.iter().zip(&spec.density_w_hz) {
        writeln!(out, "{},{},{}", f, f + spec.envelope_ref_hz, d)?;
    }
    out.flush()?;
    Ok(())
}

fn write_artifacts(
    run: &Run,
    out: &Path,
    iq_dump: bool,
    artifacts: &mut Vec<String>,
) -> rofsim::Result<()> {
    for (name, symbols, report) in [
        (
            "downlink_constellation.csv",
            &run.downlink_symbols_at_ru,
            &run.downlink_evm,
        ),
        (
            "uplink_constellation.csv",
            &run.uplink_symbols_at_cu,
            &run.uplink_evm,
        ),
    ] {
        constellation_export(symbols, &out.join(name), Some(report))?;
        artifacts.push(name.into());
        artifacts.push(name.replace(".csv", ".json"));
    }
    for (tap, wf) in &run.tap_waveforms {
        let name = format!("psd_{tap}.csv");
        write_psd(&out.join(&name), wf)?;
        artifacts.push(name);
        if iq_dump {
            let name = format!("iq_{tap}.rfiq");
            let mut f = BufWriter::new(File::create(out.join(&name))?);
            write_iq(&mut f, wf)?;
            f.flush()?;
            artifacts.push(name);
        }
    }
    Ok(())
}

/// One end-to-end run of the scenario at `config` (default testbed when
/// absent); writes `run.json` plus constellation, PSD and optional IQ
/// files into `out`.
pub fn cmd_run(config: Option<&Path>, out: &Path, flags: &RunFlags) -> rofsim::Result<Exit> {
    run_scenario(&load_scenario(config)?, out, flags)
}

pub fn run_scenario(scenario: &Scenario, out: &Path, flags: &RunFlags) -> rofsim::Result<Exit> {
    let s = flags.apply(scenario)?;
    std::fs::create_dir_all(out)?;
    let sent = qos_payload(&s);
    let mut report = RunReport {
        status: String::new(),
        seed: s.seed,
        symbols: s.symbols,
        of1_length_km: s.of1_fiber.length_km,
        downlink: None,
        uplink: None,
        qos: None,
        lock_state: None,
        lock_error: None,
        delays: Vec::new(),
        budget: None,
        diagnostics: Vec::new(),
        artifacts: Vec::new(),
        scenario: s.clone(),
    };
    let exit = match run_default::<f64>(&s) {
        Ok(run) => {
            write_artifacts(&run, out, flags.iq_dump, &mut report.artifacts)?;
            let passed = run.passed();
            report.status = if passed { "pass" } else { "fail" }.into();
            report.downlink = Some(strip(&run.downlink_evm));
            report.uplink = Some(strip(&run.uplink_evm));
            report.qos = run.qos.as_ref().map(|q| QosReport {
                sent: String::from_utf8_lossy(&sent).into_owned(),
                recovered: String::from_utf8_lossy(&q.payload).into_owned(),
                crc_ok: q.crc_ok,
                delivered: q.delivered(&sent),
                error: q.error.clone(),
            });
            report.lock_state = Some(run.lock_state);
            report.delays = run.delays;
            report.budget = Some(run.budget);
            report.diagnostics = run.diagnostics;
            if passed {
                Exit::Success
            } else {
                Exit::Failed
            }
        }
        Err(Error::Lock { stage, state }) => {
            report.status = "lock_error".into();
            report.lock_state = Some(state);
            report.lock_error = Some(LockFailure {
                stage,
                margin_ghz: state.margin_ghz,
                injection_ratio_db: state.injection_ratio_db,
            });
            Exit::Failed
        }
        Err(e) => return Err(e),
    };
    report.artifacts.insert(0, "run.json".into());
    write_json(&out.join("run.json"), &report)?;
    Ok(exit)
}
