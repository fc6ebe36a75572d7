use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use rofsim::link::{run_default, Scenario};
use rofsim::metrics::{threshold_verdict, Verdict};
use rofsim::Error;
use serde::{Deserialize, Serialize};

use crate::{load_scenario, read_json, thread_pool, write_text, Exit, RunFlags};

/// One parameter swept over values, each value run with every seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Dotted scenario path, e.g. `of1.length_km`.
    pub parameter_path: String,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
    pub symbols_per_point: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            parameter_path: "of1.length_km".into(),
            values: (0..=6).map(f64::from).collect(),
            seeds: vec![1, 2, 3],
            symbols_per_point: 100_000,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> rofsim::Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.values.is_empty() {
            return bad("sweep needs at least one value".into());
        }
        if self.seeds.is_empty() {
            return bad("sweep needs at least one seed".into());
        }
        if self.symbols_per_point < 10_000 {
            return bad(format!(
                "symbols_per_point must be at least 10000, got {}",
                self.symbols_per_point
            ));
        }
        if self.parameter_path.ends_with("length_km")
            && self.values.windows(2).any(|w| !(w[1] > w[0]))
        {
            return bad("length sweep values must be strictly increasing".into());
        }
        Ok(())
    }

    pub fn load(path: &Path) -> rofsim::Result<Self> {
        read_json(path)
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Worker count; `None` defers to `ROFSIM_THREADS`, then to all cores.
    pub threads: Option<usize>,
    pub symbols: Option<usize>,
    pub no_noise: bool,
}

struct Point {
    value: f64,
    seed: u64,
    outcome: Result<PointResult, String>,
}

struct PointResult {
    downlink: f64,
    uplink: f64,
    lock_margin: f64,
    qos_ok: Option<bool>,
}

fn run_point(
    base: &Scenario,
    spec: &SweepSpec,
    value: f64,
    seed: u64,
    flags: &RunFlags,
) -> Result<PointResult, String> {
    let s = base
        .with_number(&spec.parameter_path, value)
        .and_then(|s| flags.apply(&s))
        .map_err(|e| e.to_string())?;
    let s = Scenario { seed, ..s };
    match run_default::<f64>(&s) {
        Ok(r) => Ok(PointResult {
            downlink: r.downlink_evm.evm_rms_percent,
            uplink: r.uplink_evm.evm_rms_percent,
            lock_margin: r.lock_state.margin_ghz,
            qos_ok: r.qos.as_ref().map(|q| q.crc_ok),
        }),
        Err(e) => Err(e.to_string()),
    }
}

fn csv_field(text: &str) -> String {
    if text.contains([',', '"', '\n']) {
        format!("\"{}\"", text.replace('"', "\"\"").replace('\n', " "))
    } else {
        text.to_string()
    }
}

fn verdict_str(evm: f64, order: u32, base: &Scenario) -> &'static str {
    match threshold_verdict(evm, order, &base.thresholds) {
        Ok(Verdict::Pass) => "pass",
        Ok(Verdict::Fail) => "fail",
        Err(_) => "",
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

const HEADER: &str = "kind,parameter,value,seed,status,downlink_evm_percent,uplink_evm_percent,downlink_evm_std_percent,uplink_evm_std_percent,downlink_verdict,uplink_verdict,lock_margin_ghz,qos_crc_ok,error\n";

/// Runs every (value, seed) point and renders `sweep.csv`.
pub fn sweep_csv(
    base: &Scenario,
    spec: &SweepSpec,
    opts: &SweepOptions,
) -> rofsim::Result<(String, bool)> {
    spec.validate()?;
    base.get(&spec.parameter_path)?;
    let flags = RunFlags {
        symbols: Some(opts.symbols.unwrap_or(spec.symbols_per_point)),
        no_noise: opts.no_noise,
        ..RunFlags::default()
    };
    let jobs: Vec<(f64, u64)> = spec
        .values
        .iter()
        .flat_map(|&v| spec.seeds.iter().map(move |&s| (v, s)))
        .collect();
    let pool = thread_pool(opts.threads)?;
    let points: Vec<Point> = pool.install(|| {
        jobs.par_iter()
            .map(|&(value, seed)| Point {
                value,
                seed,
                outcome: run_point(base, spec, value, seed, &flags),
            })
            .collect()
    });

    let order = base.modem.order_m;
    let path = &spec.parameter_path;
    let mut csv = String::from(HEADER);
    let mut any_failed = false;
    for p in &points {
        match &p.outcome {
            Ok(r) => {
                let qos = r.qos_ok.map(|b| b.to_string()).unwrap_or_default();
                writeln!(
                    csv,
                    "point,{path},{},{},ok,{},{},,,{},{},{},{qos},",
                    p.value,
                    p.seed,
                    r.downlink,
                    r.uplink,
                    verdict_str(r.downlink, order, base),
                    verdict_str(r.uplink, order, base),
                    r.lock_margin
                )
                .unwrap();
            }
            Err(e) => {
                any_failed = true;
                writeln!(
                    csv,
                    "point,{path},{},{},failed,,,,,,,,,{}",
                    p.value,
                    p.seed,
                    csv_field(e)
                )
                .unwrap();
            }
        }
    }
    for &value in &spec.values {
        let ok: Vec<&PointResult> = points
            .iter()
            .filter(|p| p.value == value)
            .filter_map(|p| p.outcome.as_ref().ok())
            .collect();
        if ok.is_empty() {
            writeln!(csv, "summary,{path},{value},,failed,,,,,,,,,").unwrap();
            continue;
        }
        let status = if ok.len() == spec.seeds.len() {
            "ok"
        } else {
            "partial"
        };
        let (dm, ds) = mean_std(&ok.iter().map(|r| r.downlink).collect::<Vec<_>>());
        let (um, us) = mean_std(&ok.iter().map(|r| r.uplink).collect::<Vec<_>>());
        let (lm, _) = mean_std(&ok.iter().map(|r| r.lock_margin).collect::<Vec<_>>());
        writeln!(
            csv,
            "summary,{path},{value},,{status},{dm},{um},{ds},{us},{},{},{lm},,",
            verdict_str(dm, order, base),
            verdict_str(um, order, base)
        )
        .unwrap();
    }
    Ok((csv, any_failed))
}

/// Sweeps one parameter; writes `sweep.csv` (and the spec echo) into
/// `out`. Exit 2 when any point failed to run.
pub fn cmd_sweep(
    config: Option<&Path>,
    spec: &SweepSpec,
    out: &Path,
    opts: &SweepOptions,
) -> rofsim::Result<Exit> {
    let base = load_scenario(config)?;
    let (csv, any_failed) = sweep_csv(&base, spec, opts)?;
    std::fs::create_dir_all(out)?;
    write_text(&out.join("sweep.csv"), &csv)?;
    crate::write_json(&out.join("sweep_spec.json"), spec)?;
    Ok(if any_failed {
        Exit::Failed
    } else {
        Exit::Success
    })
}
