use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::PlannerError;
use crate::action::{Action, ActionKind, Target};
use crate::sim::{placement_for, ContinuumState, NodeId};

/// Suspicion level above which a fault triggers targeted actions.
pub const ENUMERATION_THRESHOLD: f64 = 0.2;

/// One action type and the faults it forces inactive, with efficacy ρ.
///
/// The keys of `intervention` double as triggers: the action is proposed for
/// a node when any of them is suspect there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub kind: ActionKind,
    #[serde(default)]
    pub intervention: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Catalog {
    pub threshold: f64,
    /// Consecutive suspect rounds before escalation is offered.
    pub escalate_after: u32,
    pub entries: Vec<CatalogEntry>,
}

fn entry(kind: ActionKind, map: &[(&str, f64)]) -> CatalogEntry {
    CatalogEntry {
        kind,
        intervention: map.iter().map(|(f, r)| (f.to_string(), *r)).collect(),
    }
}

impl Default for Catalog {
    fn default() -> Self {
        Catalog {
            threshold: ENUMERATION_THRESHOLD,
            escalate_after: 3,
            entries: vec![
                entry(ActionKind::RestartNode, &[("crash", 0.9)]),
                entry(ActionKind::ReassignTask, &[("task-fail", 0.9)]),
                entry(ActionKind::RerouteLink, &[("comm-error", 0.9)]),
                entry(ActionKind::ReduceLoad, &[("resource-denied", 0.9)]),
                entry(ActionKind::IsolateNode, &[("crash", 0.5), ("comm-error", 0.5)]),
                entry(ActionKind::EscalateHuman, &[]),
            ],
        }
    }
}

impl Catalog {
    pub fn validate(&self) -> Result<(), PlannerError> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(PlannerError::InvalidConfig(format!("enumeration threshold {}", self.threshold)));
        }
        let mut seen = BTreeSet::new();
        for e in &self.entries {
            if e.kind == ActionKind::DoNothing {
                return Err(PlannerError::InvalidConfig("do-nothing is implicit".into()));
            }
            if !seen.insert(e.kind) {
                return Err(PlannerError::InvalidConfig(format!("duplicate catalog entry {}", e.kind)));
            }
            if let Some((f, rho)) = e.intervention.iter().find(|(_, r)| !(0.0..=1.0).contains(*r)) {
                return Err(PlannerError::InvalidConfig(format!("{} sets rho {rho} on `{f}`", e.kind)));
            }
        }
        Ok(())
    }
}

/// Per-node run lengths of suspicion, and nodes already escalated.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Escalation {
    pub streaks: BTreeMap<NodeId, u32>,
    pub escalated: BTreeSet<NodeId>,
}

impl Escalation {
    /// Folds one observation round into the streaks. A node that stops being
    /// suspect may be escalated again later.
    pub fn observe(&mut self, beliefs: &NodeBeliefs, threshold: f64) {
        let mut next = BTreeMap::new();
        for (node, faults) in beliefs {
            if faults.values().any(|&q| q > threshold) {
                next.insert(node.clone(), self.streaks.get(node).copied().unwrap_or(0) + 1);
            } else {
                self.escalated.remove(node);
            }
        }
        self.streaks = next;
    }

    pub fn eligible(&self, node: &NodeId, after: u32) -> bool {
        !self.escalated.contains(node) && self.streaks.get(node).is_some_and(|&s| s >= after)
    }

    pub fn record(&mut self, action: &Action) {
        if action.kind == ActionKind::EscalateHuman {
            if let Some(node) = action.target.node() {
                self.escalated.insert(node.clone());
            }
        }
    }
}

/// Q(f = active) per fault variable, per observed node.
pub type NodeBeliefs = BTreeMap<NodeId, BTreeMap<String, f64>>;

/// Candidate actions: do-nothing first, then per node (in id order) the
/// catalog entries whose triggers are suspect there, in catalog order.
///
/// Intervention maps keep only faults that the node's belief covers.
pub fn enumerate_actions(
    state: &ContinuumState,
    beliefs: &NodeBeliefs,
    catalog: &Catalog,
    escalation: &Escalation,
) -> Vec<Action> {
    let mut out = vec![Action::do_nothing()];
    for (node, faults) in beliefs {
        let Some(ns) = state.nodes.get(node) else { continue };
        if ns.spec.isolated {
            continue;
        }
        for e in &catalog.entries {
            let map: BTreeMap<String, f64> = e
                .intervention
                .iter()
                .filter(|(f, _)| faults.contains_key(*f))
                .map(|(f, r)| (f.clone(), *r))
                .collect();
            let node_target = Target::Node { node: node.clone() };
            match e.kind {
                ActionKind::EscalateHuman => {
                    if escalation.eligible(node, catalog.escalate_after) {
                        out.push(Action::new(e.kind, node_target, map));
                    }
                }
                _ => {
                    if !map.keys().any(|f| faults[f] > catalog.threshold) {
                        continue;
                    }
                    match e.kind {
                        ActionKind::ReassignTask => {
                            for task in state.hosted_tasks(node) {
                                let workload = state.tasks[&task].spec.workload;
                                if let Some(to) = placement_for(state, workload, node) {
                                    let target = Target::Task { task, from: node.clone(), to };
                                    out.push(Action::new(e.kind, target, map.clone()));
                                }
                            }
                        }
                        ActionKind::RerouteLink => {
                            if state.links.iter().filter(|l| l.touches(node)).count() >= 2 {
                                out.push(Action::new(e.kind, node_target, map));
                            }
                        }
                        _ => out.push(Action::new(e.kind, node_target, map)),
                    }
                }
            }
        }
    }
    out
}
