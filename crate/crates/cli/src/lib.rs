//! Batch front end for `rofsim`: single runs, parameter sweeps,
//! calibration against measured EVM anchors, and the config schema.
//!
//! Exit codes: 0 success, 1 error, 2 failed verdict or failed sweep
//! point, 3 calibration did not converge.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod calibrate;
mod run;
mod schema;
mod sweep;

use std::path::Path;

use rofsim::link::{NoiseConfig, Scenario};

pub use calibrate::{
    calibrate, cmd_calibrate, CalibrationOutcome, CalibrationSpec, FreeParameter, Observable,
    ParameterFit, Residual, Target,
};
pub use run::{cmd_run, run_scenario, LockFailure, QosReport, RunReport};
pub use schema::{cmd_schema, SchemaKind};
pub use sweep::{cmd_sweep, sweep_csv, SweepOptions, SweepSpec};

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Success = 0,
    Error = 1,
    Failed = 2,
    NotConverged = 3,
}

impl Exit {
    pub fn code(self) -> i32 {
        self as i32
    }
}

/// Command-line adjustments applied on top of a loaded scenario.
#[derive(Debug, Clone, Default)]
pub struct RunFlags {
    pub seed: Option<u64>,
    pub symbols: Option<usize>,
    pub no_noise: bool,
    pub iq_dump: bool,
}

impl RunFlags {
    pub fn apply(&self, scenario: &Scenario) -> rofsim::Result<Scenario> {
        let mut s = scenario.clone();
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        if let Some(n) = self.symbols {
            s.symbols = n;
        }
        if self.no_noise {
            s.noise = NoiseConfig::off();
        }
        s.validate()?;
        Ok(s)
    }
}

/// Loads a scenario file, or the default testbed when `path` is `None`.
pub fn load_scenario(path: Option<&Path>) -> rofsim::Result<Scenario> {
    match path {
        Some(p) => Scenario::load(p),
        None => Ok(Scenario::default()),
    }
}

/// Worker pool sized by `ROFSIM_THREADS` unless `threads` is given.
pub fn thread_pool(threads: Option<usize>) -> rofsim::Result<rayon::ThreadPool> {
    let n = match threads {
        Some(n) => n,
        None => match std::env::var("ROFSIM_THREADS") {
            Ok(v) => v.trim().parse().map_err(|_| {
                rofsim::Error::Config(format!(
                    "ROFSIM_THREADS must be a positive integer, got `{v}`"
                ))
            })?,
            Err(_) => 0,
        },
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| rofsim::Error::Config(format!("cannot start worker pool: {e}")))
}

pub(crate) fn write_text(path: &Path, text: &str) -> rofsim::Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

pub(crate) fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> rofsim::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> rofsim::Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| rofsim::Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut de = serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        rofsim::Error::Config(format!(
            "{}: at `{}`: {}",
            path.display(),
            e.path(),
            e.inner()
        ))
    })
}
