//! Seeded round-based simulator of a distributed computing continuum.

mod engine;
mod scenario;
mod state;
mod truth;
mod types;

use std::io::{self, BufRead, Write};

use thiserror::Error;

pub use engine::{apply_intervention, placement_for, step_round, InjectedFault, InterventionOutcome, NodeSample, RoundTrace};
pub use scenario::{
    DynamicsConfig, EffectConfig, EffectsConfig, InjectionConfig, InjectionPhase, LinkConfig, NodeConfig,
    NodeHazardConfig, ScenarioConfig, TaskConfig, TruthConfig, TruthVarConfig,
};
pub use state::{ContinuumState, Injection, NodeState, TaskRecord};
pub use truth::{GroundTruthNet, TruthKind, TruthVariable};
pub use types::{
    Checkpoint, EventType, Link, LogEntry, NodeId, NodeSpec, Phase, Severity, TaskExecution, TaskId, TaskSpec,
    Tier, CONTROL_SOURCE, FAULT_EVENTS,
};


#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario field `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("unknown task `{0}`")]
    UnknownTask(TaskId),
    #[error("simulation already finalized")]
    Finalized,
    #[error("action `{0}` does not fit its target")]
    InvalidAction(String),
}

/// Writes entries as JSON lines in the fixed field order of [`LogEntry`].
pub fn write_log_jsonl<W: Write>(mut out: W, entries: &[LogEntry]) -> io::Result<()> {
    for e in entries {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_log_jsonl<R: BufRead>(input: R) -> io::Result<Vec<LogEntry>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?);
    }
    Ok(out)
}
