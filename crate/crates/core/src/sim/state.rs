use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::scenario::{DynamicsConfig, EffectsConfig};
use super::types::{
    Checkpoint, EventType, Link, LogEntry, NodeId, NodeSpec, Severity, TaskExecution, TaskId,
    TaskSpec, CONTROL_SOURCE,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeState {
    pub spec: NodeSpec,
    /// Persistent faults currently active (e.g. a crash awaiting restart).
    pub faults: BTreeSet<String>,
    pub uplink: Option<usize>,
    pub drain: f64,
    /// Round at which a scripted repair clears a persistent fault.
    pub scripted_clear: BTreeMap<String, u64>,
    pub(crate) next_ts: u64,
}

impl NodeState {
    pub fn new(spec: NodeSpec, uplink: Option<usize>, drain: f64) -> Self {
        NodeState {
            spec,
            faults: BTreeSet::new(),
            uplink,
            drain,
            scripted_clear: BTreeMap::new(),
            next_ts: 1,
        }
    }

    pub fn is_isolated(&self) -> bool {
        self.spec.isolated
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub spec: TaskSpec,
    pub exec: TaskExecution,
    pub checkpoints: Vec<Checkpoint>,
    pub hits: u32,
    pub misses: u32,
    pub completed: u32,
}

impl TaskRecord {
    pub fn new(spec: TaskSpec, exec: TaskExecution) -> Self {
        TaskRecord {
            spec,
            exec,
            checkpoints: Vec::new(),
            hits: 0,
            misses: 0,
            completed: 0,
        }
    }

    /// Latest checkpoint of the running instance.
    pub fn last_checkpoint(&self) -> Option<&Checkpoint> {
        self.checkpoints
            .iter()
            .rev()
            .find(|c| c.instance == self.exec.instance)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Injection {
    /// Absolute simulator round.
    pub round: u64,
    pub node: NodeId,
    pub fault: String,
    pub duration: Option<u64>,
}

/// The live simulated continuum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuumState {
    pub round: u64,
    pub nodes: BTreeMap<NodeId, NodeState>,
    pub links: Vec<Link>,
    pub tasks: BTreeMap<TaskId, TaskRecord>,
    pub injections: Vec<Injection>,
    pub node_hazards: Vec<(NodeId, String, f64)>,
    pub effects: EffectsConfig,
    pub dynamics: DynamicsConfig,
    pub interventions: u64,
    pub finalized: bool,
    logs: BTreeMap<NodeId, Vec<LogEntry>>,
    control_log: Vec<LogEntry>,
    control_ts: u64,
    /// Round stamped on new entries. Entries written between two steps
    /// belong to the interval of the next one.
    log_round: u64,
}

impl ContinuumState {
    pub(crate) fn new(
        nodes: BTreeMap<NodeId, NodeState>,
        links: Vec<Link>,
        tasks: BTreeMap<TaskId, TaskRecord>,
        injections: Vec<Injection>,
        node_hazards: Vec<(NodeId, String, f64)>,
        effects: EffectsConfig,
        dynamics: DynamicsConfig,
    ) -> Self {
        let logs = nodes.keys().map(|id| (id.clone(), Vec::new())).collect();
        ContinuumState {
            round: 0,
            nodes,
            links,
            tasks,
            injections,
            node_hazards,
            effects,
            dynamics,
            interventions: 0,
            finalized: false,
            logs,
            control_log: Vec::new(),
            control_ts: 1,
            log_round: 1,
        }
    }

    pub fn node_logs(&self, node: &NodeId) -> &[LogEntry] {
        self.logs.get(node).map_or(&[], Vec::as_slice)
    }

    pub fn control_log(&self) -> &[LogEntry] {
        &self.control_log
    }

    /// Every entry, node streams and control stream, sorted by (round, node, ts).
    pub fn all_logs(&self) -> Vec<LogEntry> {
        let mut out: Vec<LogEntry> = self
            .logs
            .values()
            .flatten()
            .chain(self.control_log.iter())
            .cloned()
            .collect();
        out.sort_by(|a, b| (a.round, &a.node, a.ts).cmp(&(b.round, &b.node, b.ts)));
        out
    }

    pub(crate) fn all_log_len(&self) -> usize {
        self.logs.values().map(Vec::len).sum::<usize>() + self.control_log.len()
    }

    /// Hosted load in compute units.
    pub fn load(&self, node: &NodeId) -> f64 {
        self.tasks
            .values()
            .filter(|t| &t.exec.host == node)
            .map(|t| t.spec.workload)
            .sum()
    }

    pub fn hosted_tasks(&self, node: &NodeId) -> Vec<TaskId> {
        self.tasks
            .values()
            .filter(|t| &t.exec.host == node)
            .map(|t| t.spec.id.clone())
            .collect()
    }

    pub fn finalize(&mut self) {
        self.finalized = true;
    }

    /// Appends to a node's stream; isolated nodes emit nothing.
    pub(crate) fn set_log_round(&mut self, round: u64) {
        self.log_round = round;
    }

    pub(crate) fn emit(
        &mut self,
        node: &NodeId,
        event: EventType,
        severity: Severity,
        task: Option<TaskId>,
        metrics: BTreeMap<String, f64>,
    ) -> Option<LogEntry> {
        let state = self.nodes.get_mut(node)?;
        if state.spec.isolated {
            return None;
        }
        let entry = LogEntry {
            node: node.clone(),
            ts: state.next_ts,
            round: self.log_round,
            event,
            severity,
            task,
            metrics,
        };
        state.next_ts += 1;
        self.logs.entry(node.clone()).or_default().push(entry.clone());
        Some(entry)
    }

    pub(crate) fn emit_control(&mut self, event: EventType, severity: Severity, task: Option<TaskId>) -> LogEntry {
        let entry = LogEntry {
            node: NodeId::from(CONTROL_SOURCE),
            ts: self.control_ts,
            round: self.log_round,
            event,
            severity,
            task,
            metrics: BTreeMap::new(),
        };
        self.control_ts += 1;
        self.control_log.push(entry.clone());
        entry
    }
}
