//! Healing actions shared by the planner (which scores them) and the
//! simulator (which executes them).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::sim::{NodeId, TaskId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActionKind {
    DoNothing,
    RestartNode,
    ReassignTask,
    RerouteLink,
    ReduceLoad,
    IsolateNode,
    EscalateHuman,
}

impl ActionKind {
    pub const ALL: [ActionKind; 7] = [
        ActionKind::DoNothing,
        ActionKind::RestartNode,
        ActionKind::ReassignTask,
        ActionKind::RerouteLink,
        ActionKind::ReduceLoad,
        ActionKind::IsolateNode,
        ActionKind::EscalateHuman,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::DoNothing => "do-nothing",
            ActionKind::RestartNode => "restart-node",
            ActionKind::ReassignTask => "reassign-task",
            ActionKind::RerouteLink => "reroute-link",
            ActionKind::ReduceLoad => "reduce-load",
            ActionKind::IsolateNode => "isolate-node",
            ActionKind::EscalateHuman => "escalate-human",
        }
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ActionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ActionKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown action kind '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Target {
    None,
    Node { node: NodeId },
    Task { task: TaskId, from: NodeId, to: NodeId },
}

impl Target {
    /// Node whose fault variables the action intervenes on.
    pub fn node(&self) -> Option<&NodeId> {
        match self {
            Target::None => None,
            Target::Node { node } => Some(node),
            Target::Task { from, .. } => Some(from),
        }
    }
}

/// A candidate healing action.
///
/// `intervention` maps a fault variable to the effectiveness `rho` with which
/// the action forces it inactive. Do-nothing carries an empty map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub id: String,
    pub kind: ActionKind,
    pub target: Target,
    pub intervention: BTreeMap<String, f64>,
}

impl Action {
    pub const DO_NOTHING_ID: &'static str = "do-nothing";

    pub fn do_nothing() -> Self {
        Action {
            id: Self::DO_NOTHING_ID.to_string(),
            kind: ActionKind::DoNothing,
            target: Target::None,
            intervention: BTreeMap::new(),
        }
    }

    pub fn new(kind: ActionKind, target: Target, intervention: BTreeMap<String, f64>) -> Self {
        let id = match &target {
            Target::None => kind.as_str().to_string(),
            Target::Node { node } => format!("{kind}:{node}"),
            Target::Task { task, to, .. } => format!("{kind}:{task}->{to}"),
        };
        Action {
            id,
            kind,
            target,
            intervention,
        }
    }

    pub fn is_do_nothing(&self) -> bool {
        self.kind == ActionKind::DoNothing
    }
}
