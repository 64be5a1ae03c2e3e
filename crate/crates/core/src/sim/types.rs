use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! string_id {
    ($name:ident) => {
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_string())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                $name(s)
            }
        }
    };
}

string_id!(NodeId);
string_id!(TaskId);

/// Source id used for control-plane entries (agent actions, escalations).
pub const CONTROL_SOURCE: &str = "control";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tier {
    Cloud,
    Fog,
    Edge,
    Mobile,
    Iot,
    Sensor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: NodeId,
    pub tier: Tier,
    pub capacity: f64,
    pub energy: f64,
    pub mobile: bool,
    pub link_reliability: f64,
    pub isolated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub a: NodeId,
    pub b: NodeId,
    pub reliability: f64,
}

impl Link {
    pub fn touches(&self, node: &NodeId) -> bool {
        &self.a == node || &self.b == node
    }
}

/// T = ⟨workload, input deps, mapping, deadline⟩ plus its subtask pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: TaskId,
    pub workload: f64,
    pub input_deps: BTreeSet<String>,
    pub mapping: String,
    pub deadline: u32,
    pub subtasks: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    /// α: initiation (input fetch, placement).
    Alpha,
    /// β: computation, one subtask per round.
    Beta,
    /// γ: completion and final checkpoint.
    Gamma,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskExecution {
    pub task: TaskId,
    pub host: NodeId,
    pub phase: Phase,
    /// Number of subtasks completed in this attempt.
    pub subtask: u32,
    pub rounds_elapsed: u32,
    pub instance: u32,
    pub missed: bool,
}

impl TaskExecution {
    /// 1-based index of the subtask that runs next.
    pub fn next_subtask(&self) -> u32 {
        self.subtask + 1
    }
}

/// ζ = ⟨s, D, θ⟩ with the round it was written in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub task: TaskId,
    pub instance: u32,
    pub state: String,
    pub segment: u32,
    pub params: String,
    pub round: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Info,
    Warn,
    Error,
    Critical,
}

/// Log event types. Anything not in the known set parses to `Other`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum EventType {
    TaskStart,
    TaskComplete,
    TaskFail,
    DeadlineMiss,
    Checkpoint,
    Crash,
    CommError,
    UserAbort,
    ResourceDenied,
    Telemetry,
    Restart,
    Isolate,
    Reassign,
    Reroute,
    ReduceLoad,
    Escalation,
    Other(String),
}

/// Fault-indicator vocabulary, in column order. `other` collects unknown
/// event types.
pub const FAULT_EVENTS: [&str; 6] = [
    "comm-error",
    "crash",
    "resource-denied",
    "task-fail",
    "user-abort",
    "other",
];

impl EventType {
    pub fn as_str(&self) -> &str {
        match self {
            EventType::TaskStart => "task-start",
            EventType::TaskComplete => "task-complete",
            EventType::TaskFail => "task-fail",
            EventType::DeadlineMiss => "deadline-miss",
            EventType::Checkpoint => "checkpoint",
            EventType::Crash => "crash",
            EventType::CommError => "comm-error",
            EventType::UserAbort => "user-abort",
            EventType::ResourceDenied => "resource-denied",
            EventType::Telemetry => "telemetry",
            EventType::Restart => "restart",
            EventType::Isolate => "isolate",
            EventType::Reassign => "reassign",
            EventType::Reroute => "reroute",
            EventType::ReduceLoad => "reduce-load",
            EventType::Escalation => "escalation",
            EventType::Other(s) => s,
        }
    }

    pub fn is_fault(&self) -> bool {
        matches!(
            self,
            EventType::TaskFail
                | EventType::Crash
                | EventType::CommError
                | EventType::UserAbort
                | EventType::ResourceDenied
        )
    }

    /// Fault column this event activates, if any. Unknown events map to `other`.
    pub fn fault_column(&self) -> Option<&str> {
        match self {
            EventType::Other(_) => Some("other"),
            e if e.is_fault() => Some(e.as_str()),
            _ => None,
        }
    }
}

impl From<String> for EventType {
    fn from(s: String) -> Self {
        match s.as_str() {
            "task-start" => EventType::TaskStart,
            "task-complete" => EventType::TaskComplete,
            "task-fail" => EventType::TaskFail,
            "deadline-miss" => EventType::DeadlineMiss,
            "checkpoint" => EventType::Checkpoint,
            "crash" => EventType::Crash,
            "comm-error" => EventType::CommError,
            "user-abort" => EventType::UserAbort,
            "resource-denied" => EventType::ResourceDenied,
            "telemetry" => EventType::Telemetry,
            "restart" => EventType::Restart,
            "isolate" => EventType::Isolate,
            "reassign" => EventType::Reassign,
            "reroute" => EventType::Reroute,
            "reduce-load" => EventType::ReduceLoad,
            "escalation" => EventType::Escalation,
            _ => EventType::Other(s),
        }
    }
}

impl From<&str> for EventType {
    fn from(s: &str) -> Self {
        EventType::from(s.to_string())
    }
}

impl From<EventType> for String {
    fn from(e: EventType) -> Self {
        e.as_str().to_string()
    }
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One structured log record. Field order is the export order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub node: NodeId,
    pub ts: u64,
    pub round: u64,
    pub event: EventType,
    pub severity: Severity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskId>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metrics: BTreeMap<String, f64>,
}
