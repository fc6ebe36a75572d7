use rofsim::link::Scenario;

use crate::{CalibrationSpec, SweepSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemaKind {
    Scenario,
    Sweep,
    Calibration,
}

/// JSON schema of a config file kind.
pub fn cmd_schema(kind: SchemaKind) -> String {
    let schema = match kind {
        SchemaKind::Scenario => schemars::schema_for!(Scenario),
        SchemaKind::Sweep => schemars::schema_for!(SweepSpec),
        SchemaKind::Calibration => schemars::schema_for!(CalibrationSpec),
    };
    let mut text = serde_json::to_string_pretty(&schema).expect("schema serializes");
    text.push('\n');
    text
}
