use thiserror::Error;

use crate::oil_vcsel::LockState;

/// Errors raised by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition of an operation was violated by its caller.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A scenario or component parameter is invalid.
    #[error("configuration error: {0}")]
    Config(String),

    /// The OIL-VCSEL fell out of injection lock.
    #[error("{stage}: VCSEL unlocked (margin {:.3} GHz, injection ratio {:.2} dB)", state.margin_ghz, state.injection_ratio_db)]
    Lock { stage: String, state: LockState },

    /// The QoS frame could not be located in the uplink.
    #[error("service data extraction failed: {0}")]
    Extraction(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Non-fatal condition surfaced by a processing stage.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Diagnostic {
    pub stage: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(stage: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            stage: stage.into(),
            message: message.into(),
        }
    }
}
