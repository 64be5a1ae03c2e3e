//! Round advancement and action execution.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::state::ContinuumState;
use super::truth::GroundTruthNet;
use super::types::{Checkpoint, EventType, LogEntry, NodeId, Phase, Severity, TaskId};
use super::SimError;
use crate::action::{Action, ActionKind, Target};
use crate::seed::{derive_seed, rng_from};

/// Hidden per-node outcome of one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSample {
    pub node: NodeId,
    /// Truth-variable states, indexed like the truth net.
    pub states: Vec<u8>,
    pub active_faults: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectedFault {
    pub node: NodeId,
    pub fault: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTrace {
    pub round: u64,
    pub injected: Vec<InjectedFault>,
    pub samples: Vec<NodeSample>,
    pub completed: Vec<TaskId>,
    pub missed: Vec<TaskId>,
    pub entries: usize,
}

impl RoundTrace {
    pub fn fault_active(&self, node: &NodeId, fault: &str) -> bool {
        self.samples
            .iter()
            .any(|s| &s.node == node && s.active_faults.iter().any(|f| f == fault))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionOutcome {
    pub action: String,
    /// The action's effect roll succeeded.
    pub effective: bool,
    pub rejected: Option<String>,
    pub entries: Vec<LogEntry>,
}

fn noisy_or(hazards: &mut BTreeMap<usize, f64>, v: usize, h: f64) {
    let prev = hazards.get(&v).copied().unwrap_or(0.0);
    hazards.insert(v, 1.0 - (1.0 - prev) * (1.0 - h.clamp(0.0, 1.0)));
}

/// Advances every node and task by one round.
pub fn step_round(state: &mut ContinuumState, truth: &GroundTruthNet, seed: u64) -> Result<RoundTrace, SimError> {
    if state.finalized {
        return Err(SimError::Finalized);
    }
    state.round += 1;
    let round = state.round;
    state.set_log_round(round);
    let vars = truth.variables();

    for node in state.nodes.values_mut() {
        node.scripted_clear.retain(|fault, until| {
            if *until <= round {
                node.faults.remove(fault);
                false
            } else {
                true
            }
        });
        if node.spec.mobile {
            node.spec.energy = (node.spec.energy - node.drain).max(0.0);
        }
    }

    // Injections hold the fault active until their scripted repair, or until
    // an action clears it when no duration is given and the fault persists.
    let mut injected = Vec::new();
    for inj in state.injections.iter().filter(|i| i.round == round) {
        let Some(node) = state.nodes.get_mut(&inj.node) else { continue };
        let persistent = truth.index_of(&inj.fault).is_some_and(|v| vars[v].persistent);
        node.faults.insert(inj.fault.clone());
        match inj.duration {
            Some(d) => {
                node.scripted_clear.insert(inj.fault.clone(), round + d.max(1));
            }
            None if !persistent => {
                node.scripted_clear.insert(inj.fault.clone(), round + 1);
            }
            None => {}
        }
        injected.push(InjectedFault {
            node: inj.node.clone(),
            fault: inj.fault.clone(),
        });
    }

    let before = state.all_log_len();
    let ids: Vec<NodeId> = state.nodes.keys().cloned().collect();
    let mut samples = Vec::with_capacity(ids.len());
    for id in &ids {
        let mut rng = rng_from(derive_seed(seed, id.as_str(), round));
        let node = &state.nodes[id];
        let mut hazards = BTreeMap::new();
        for (n, fault, h) in &state.node_hazards {
            if n == id {
                if let Some(v) = truth.index_of(fault) {
                    noisy_or(&mut hazards, v, *h);
                }
            }
        }
        if let Some(v) = state.dynamics.link_fault.as_deref().and_then(|f| truth.index_of(f)) {
            noisy_or(&mut hazards, v, 1.0 - node.spec.link_reliability);
        }
        if node.spec.energy < state.dynamics.low_energy_threshold {
            if let Some(v) = state.dynamics.low_energy_fault.as_deref().and_then(|f| truth.index_of(f)) {
                noisy_or(&mut hazards, v, state.dynamics.low_energy_hazard);
            }
        }
        let clamp: BTreeMap<usize, u8> = node
            .faults
            .iter()
            .filter_map(|f| truth.index_of(f))
            .map(|v| (v, (vars[v].arity - 1) as u8))
            .collect();
        let states = truth.sample(&mut rng, &clamp, &hazards);
        let mut metrics = BTreeMap::new();
        for (v, var) in vars.iter().enumerate() {
            if var.is_fault() {
                continue;
            }
            let u: f64 = rng.gen();
            if var.compute_only && node.spec.capacity <= 0.0 {
                continue;
            }
            metrics.insert(var.name.clone(), truth.emit_value(v, states[v], u));
        }
        let active_faults: Vec<String> = vars
            .iter()
            .enumerate()
            .filter(|(v, var)| var.is_fault() && states[*v] == 1)
            .map(|(_, var)| var.name.clone())
            .collect();
        let node = state.nodes.get_mut(id).expect("node listed above");
        for (v, var) in vars.iter().enumerate() {
            if var.persistent && var.is_fault() && states[v] == 1 {
                node.faults.insert(var.name.clone());
            }
        }

        state.emit(id, EventType::Telemetry, Severity::Info, None, metrics);
        let hosted = state.hosted_tasks(id);
        for fault in &active_faults {
            let event = EventType::from(fault.as_str());
            let severity = match event {
                EventType::Crash => Severity::Critical,
                EventType::TaskFail | EventType::CommError => Severity::Error,
                _ => Severity::Warn,
            };
            let per_task = matches!(event, EventType::TaskFail | EventType::UserAbort);
            if per_task && !hosted.is_empty() {
                for t in &hosted {
                    state.emit(id, event.clone(), severity, Some(t.clone()), BTreeMap::new());
                }
            } else {
                state.emit(id, event, severity, None, BTreeMap::new());
            }
        }
        samples.push(NodeSample {
            node: id.clone(),
            states,
            active_faults,
        });
    }

    let (completed, missed) = advance_tasks(state, &samples);
    state.set_log_round(round + 1);
    let entries = state.all_log_len() - before;
    Ok(RoundTrace {
        round,
        injected,
        samples,
        completed,
        missed,
        entries,
    })
}

fn advance_tasks(state: &mut ContinuumState, samples: &[NodeSample]) -> (Vec<TaskId>, Vec<TaskId>) {
    let round = state.round;
    let mut completed = Vec::new();
    let mut missed = Vec::new();
    let task_ids: Vec<TaskId> = state.tasks.keys().cloned().collect();
    for tid in task_ids {
        let host = state.tasks[&tid].exec.host.clone();
        let host_faults: &[String] = samples
            .iter()
            .find(|s| s.node == host)
            .map_or(&[], |s| s.active_faults.as_slice());
        let isolated = state.nodes.get(&host).is_none_or(|n| n.spec.isolated);
        let blocked = isolated || host_faults.iter().any(|f| state.dynamics.blocking.contains(f));
        let stalled = host_faults.iter().any(|f| state.dynamics.alpha_blocking.contains(f));

        let mut events: Vec<(EventType, Severity)> = Vec::new();
        let rec = state.tasks.get_mut(&tid).expect("task listed above");
        rec.exec.rounds_elapsed += 1;
        if !blocked {
            match rec.exec.phase {
                Phase::Alpha if !stalled => {
                    rec.exec.phase = Phase::Beta;
                    events.push((EventType::TaskStart, Severity::Info));
                }
                Phase::Alpha => {}
                Phase::Beta => {
                    rec.exec.subtask += 1;
                    let cp = checkpoint(rec, round);
                    rec.checkpoints.push(cp);
                    events.push((EventType::Checkpoint, Severity::Info));
                    if rec.exec.subtask as usize >= rec.spec.subtasks.len() {
                        rec.exec.phase = Phase::Gamma;
                    }
                }
                Phase::Gamma => {
                    let cp = checkpoint(rec, round);
                    rec.checkpoints.push(cp);
                    events.push((EventType::Checkpoint, Severity::Info));
                    events.push((EventType::TaskComplete, Severity::Info));
                    rec.completed += 1;
                    if !rec.exec.missed {
                        rec.hits += 1;
                    }
                    completed.push(tid.clone());
                    rec.exec.phase = Phase::Alpha;
                    rec.exec.subtask = 0;
                    rec.exec.rounds_elapsed = 0;
                    rec.exec.instance += 1;
                    rec.exec.missed = false;
                }
            }
        }
        if !rec.exec.missed && rec.exec.rounds_elapsed >= rec.spec.deadline {
            rec.exec.missed = true;
            rec.misses += 1;
            missed.push(tid.clone());
            events.push((EventType::DeadlineMiss, Severity::Warn));
        }
        // An isolated host cannot log; the orchestrator records for it.
        for (event, severity) in events {
            if isolated {
                state.emit_control(event, severity, Some(tid.clone()));
            } else {
                state.emit(&host, event, severity, Some(tid.clone()), BTreeMap::new());
            }
        }
    }
    (completed, missed)
}

fn checkpoint(rec: &super::state::TaskRecord, round: u64) -> Checkpoint {
    let segment = rec.exec.subtask;
    Checkpoint {
        task: rec.spec.id.clone(),
        instance: rec.exec.instance,
        state: format!("{}#{}@{}", rec.spec.id, rec.exec.instance, segment),
        segment,
        params: format!("{:016x}", crate::seed::derive_seed(rec.exec.instance as u64, rec.spec.id.as_str(), segment as u64)),
        round,
    }
}

/// Least-loaded live node other than `exclude` with room for `workload`.
pub fn placement_for(state: &ContinuumState, workload: f64, exclude: &NodeId) -> Option<NodeId> {
    state
        .nodes
        .values()
        .filter(|n| &n.spec.id != exclude && !n.spec.isolated && n.spec.capacity > 0.0)
        .filter(|n| n.spec.capacity - state.load(&n.spec.id) >= workload)
        .min_by(|a, b| {
            let la = state.load(&a.spec.id) / a.spec.capacity;
            let lb = state.load(&b.spec.id) / b.spec.capacity;
            la.total_cmp(&lb).then_with(|| a.spec.id.cmp(&b.spec.id))
        })
        .map(|n| n.spec.id.clone())
}

/// Moves a task to `to`, resuming after its last checkpoint.
fn migrate(state: &mut ContinuumState, task: &TaskId, to: &NodeId) {
    let rec = state.tasks.get_mut(task).expect("task checked by caller");
    let resume = rec.last_checkpoint().map_or(0, |c| c.segment);
    rec.exec.host = to.clone();
    rec.exec.subtask = resume;
    rec.exec.phase = if resume == 0 {
        Phase::Alpha
    } else if resume as usize >= rec.spec.subtasks.len() {
        Phase::Gamma
    } else {
        Phase::Beta
    };
}

fn clear_faults(state: &mut ContinuumState, node: &NodeId, faults: &[String]) {
    if let Some(n) = state.nodes.get_mut(node) {
        for f in faults {
            n.faults.remove(f);
            n.scripted_clear.remove(f);
        }
    }
}

fn require_node(state: &ContinuumState, node: &NodeId) -> Result<(), SimError> {
    if state.nodes.contains_key(node) {
        Ok(())
    } else {
        Err(SimError::UnknownNode(node.clone()))
    }
}

/// Executes a healing action against the live continuum.
pub fn apply_intervention(
    state: &mut ContinuumState,
    action: &Action,
    seed: u64,
) -> Result<InterventionOutcome, SimError> {
    if state.finalized {
        return Err(SimError::Finalized);
    }
    let mut outcome = InterventionOutcome {
        action: action.id.clone(),
        effective: false,
        rejected: None,
        entries: Vec::new(),
    };
    state.interventions += 1;
    if action.kind == ActionKind::DoNothing {
        return Ok(outcome);
    }
    let effect = state
        .effects
        .get(action.kind)
        .cloned()
        .ok_or_else(|| SimError::InvalidAction(action.id.clone()))?;
    let u: f64 = rng_from(seed).gen();
    let success = u < effect.rho;

    match (&action.kind, &action.target) {
        (ActionKind::ReassignTask, Target::Task { task, to, .. }) => {
            require_node(state, to)?;
            let workload = state
                .tasks
                .get(task)
                .ok_or_else(|| SimError::UnknownTask(task.clone()))?
                .spec
                .workload;
            let dest = &state.nodes[to];
            let room = dest.spec.capacity - state.load(to);
            if dest.spec.isolated || room < workload || &state.tasks[task].exec.host == to {
                let reason = format!("{to} cannot take {task}");
                if let Some(e) = state.emit(to, EventType::ResourceDenied, Severity::Error, Some(task.clone()), BTreeMap::new()) {
                    outcome.entries.push(e);
                }
                outcome.rejected = Some(reason);
                return Ok(outcome);
            }
            outcome.entries.push(state.emit_control(EventType::Reassign, Severity::Info, Some(task.clone())));
            if success {
                migrate(state, task, to);
            }
        }
        (ActionKind::ReassignTask, _) => return Err(SimError::InvalidAction(action.id.clone())),
        (kind, Target::Node { node }) => {
            require_node(state, node)?;
            let event = match kind {
                ActionKind::RestartNode => EventType::Restart,
                ActionKind::RerouteLink => EventType::Reroute,
                ActionKind::ReduceLoad => EventType::ReduceLoad,
                ActionKind::IsolateNode => EventType::Isolate,
                ActionKind::EscalateHuman => EventType::Escalation,
                _ => return Err(SimError::InvalidAction(action.id.clone())),
            };
            let severity = if *kind == ActionKind::EscalateHuman { Severity::Critical } else { Severity::Info };
            outcome.entries.push(state.emit_control(event, severity, None));
            if success {
                match kind {
                    ActionKind::RerouteLink => reroute(state, node),
                    ActionKind::IsolateNode => isolate(state, node),
                    _ => {}
                }
                clear_faults(state, node, &effect.clears);
            }
        }
        (ActionKind::EscalateHuman, Target::None) => {
            outcome.entries.push(state.emit_control(EventType::Escalation, Severity::Critical, None));
        }
        _ => return Err(SimError::InvalidAction(action.id.clone())),
    }
    outcome.effective = success && effect.rho > 0.0;
    Ok(outcome)
}

fn reroute(state: &mut ContinuumState, node: &NodeId) {
    let candidates: Vec<usize> = (0..state.links.len())
        .filter(|&i| state.links[i].touches(node))
        .collect();
    let n = state.nodes.get_mut(node).expect("node checked by caller");
    if candidates.len() < 2 {
        return;
    }
    let pos = n.uplink.and_then(|u| candidates.iter().position(|&c| c == u)).unwrap_or(0);
    let next = candidates[(pos + 1) % candidates.len()];
    n.uplink = Some(next);
    n.spec.link_reliability = state.links[next].reliability;
}

fn isolate(state: &mut ContinuumState, node: &NodeId) {
    if let Some(n) = state.nodes.get_mut(node) {
        n.spec.isolated = true;
    }
    for task in state.hosted_tasks(node) {
        let workload = state.tasks[&task].spec.workload;
        if let Some(to) = placement_for(state, workload, node) {
            migrate(state, &task, &to);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::scenario::ScenarioConfig;

    const BASE: &str = r#"
name = "engine"

[[nodes]]
id = "cloud-0"
tier = "cloud"
capacity = 64

[[nodes]]
id = "edge-0"
tier = "edge"
capacity = 8

[[nodes]]
id = "sensor-0"
tier = "sensor"

[[links]]
a = "edge-0"
b = "cloud-0"

[[links]]
a = "edge-0"
b = "sensor-0"
reliability = 0.5

[[tasks]]
id = "train-0"
host = "edge-0"
workload = 4
deadline = 8

[[truth.variables]]
name = "crash"
kind = "fault"
persistent = true

[[truth.variables]]
name = "task-fail"
kind = "fault"
parents = ["crash"]
cpt = [[1.0, 0.0], [0.0, 1.0]]

[[truth.variables]]
name = "temperature"
kind = "hw"
states = 2
parents = ["crash"]
cpt = [[1.0, 0.0], [0.0, 1.0]]
emission = [[40.0, 50.0], [70.0, 80.0]]
"#;

    fn build(text: &str) -> (ContinuumState, GroundTruthNet) {
        ScenarioConfig::from_toml_str(text).unwrap().build().unwrap()
    }

    fn events(state: &ContinuumState, node: &str) -> Vec<String> {
        state
            .node_logs(&NodeId::from(node))
            .iter()
            .map(|e| e.event.to_string())
            .collect()
    }

    #[test]
    fn nominal_rounds_complete_tasks_on_time() {
        let (mut state, truth) = build(BASE);
        for r in 0..12 {
            let trace = step_round(&mut state, &truth, r).unwrap();
            assert!(trace.samples.iter().all(|s| s.active_faults.is_empty()));
        }
        let rec = &state.tasks[&TaskId::from("train-0")];
        assert_eq!(rec.completed, 2);
        assert_eq!(rec.hits, 2);
        assert_eq!(rec.misses, 0);
        assert!(!events(&state, "edge-0").iter().any(|e| e == "crash"));
    }

    #[test]
    fn forced_crash_blocks_tasks_and_logs_task_fail() {
        let text = BASE.replace("persistent = true", "persistent = true\ncpt = [[0.0, 1.0]]");
        let (mut state, truth) = build(&text);
        let trace = step_round(&mut state, &truth, 1).unwrap();
        assert!(trace.fault_active(&NodeId::from("edge-0"), "crash"));
        let ev = events(&state, "edge-0");
        assert!(ev.contains(&"crash".to_string()));
        assert!(ev.contains(&"task-fail".to_string()));
        assert_eq!(state.tasks[&TaskId::from("train-0")].exec.phase, Phase::Alpha);
    }

    #[test]
    fn identical_inputs_give_identical_traces() {
        let (mut a, truth) = build(BASE);
        let (mut b, _) = build(BASE);
        for r in 0..5 {
            let ta = serde_json::to_string(&step_round(&mut a, &truth, r).unwrap()).unwrap();
            let tb = serde_json::to_string(&step_round(&mut b, &truth, r).unwrap()).unwrap();
            assert_eq!(ta, tb);
        }
        assert_eq!(a.all_logs(), b.all_logs());
    }

    #[test]
    fn restart_with_full_effect_clears_crash() {
        let mut text = BASE.to_string();
        text.push_str("\n[[injections]]\nphase = \"bootstrap\"\nround = 1\nnode = \"edge-0\"\nfault = \"crash\"\n");
        text = text.replace("name = \"engine\"", "name = \"engine\"\nbootstrap_rounds = 1");
        text.push_str("\n[effects.restart-node]\nrho = 1.0\nclears = [\"crash\"]\n");
        let (mut state, truth) = build(&text);
        step_round(&mut state, &truth, 1).unwrap();
        assert!(state.nodes[&NodeId::from("edge-0")].faults.contains("crash"));
        let restart = Action::new(ActionKind::RestartNode, Target::Node { node: "edge-0".into() }, BTreeMap::new());
        let out = apply_intervention(&mut state, &restart, 7).unwrap();
        assert!(out.effective);
        let trace = step_round(&mut state, &truth, 2).unwrap();
        assert!(!trace.fault_active(&NodeId::from("edge-0"), "crash"));
    }

    #[test]
    fn do_nothing_leaves_state_unchanged() {
        let (mut state, truth) = build(BASE);
        step_round(&mut state, &truth, 1).unwrap();
        let before = state.clone();
        apply_intervention(&mut state, &Action::do_nothing(), 3).unwrap();
        let mut expected = before;
        expected.interventions += 1;
        assert_eq!(state, expected);
    }

    #[test]
    fn reassign_resumes_after_checkpoint() {
        let text = BASE.to_string() + "\n[effects.reassign-task]\nrho = 1.0\n";
        let (mut state, truth) = build(&text);
        // α→β in round 1, subtasks 1 and 2 in rounds 2 and 3.
        for r in 1..=3 {
            step_round(&mut state, &truth, r).unwrap();
        }
        let tid = TaskId::from("train-0");
        assert_eq!(state.tasks[&tid].last_checkpoint().unwrap().segment, 2);
        let action = Action::new(
            ActionKind::ReassignTask,
            Target::Task { task: tid.clone(), from: "edge-0".into(), to: "cloud-0".into() },
            BTreeMap::new(),
        );
        apply_intervention(&mut state, &action, 1).unwrap();
        let exec = &state.tasks[&tid].exec;
        assert_eq!(exec.host, NodeId::from("cloud-0"));
        assert_eq!(exec.next_subtask(), 3);
        assert_eq!(exec.phase, Phase::Beta);
    }

    #[test]
    fn reassign_without_capacity_is_rejected_with_log() {
        let (mut state, truth) = build(BASE);
        step_round(&mut state, &truth, 1).unwrap();
        let before_host = state.tasks[&TaskId::from("train-0")].exec.host.clone();
        let action = Action::new(
            ActionKind::ReassignTask,
            Target::Task { task: "train-0".into(), from: "edge-0".into(), to: "sensor-0".into() },
            BTreeMap::new(),
        );
        let out = apply_intervention(&mut state, &action, 1).unwrap();
        assert!(out.rejected.is_some());
        assert_eq!(state.tasks[&TaskId::from("train-0")].exec.host, before_host);
        assert_eq!(events(&state, "sensor-0").last().unwrap(), "resource-denied");
    }

    #[test]
    fn isolated_nodes_stop_logging() {
        let (mut state, truth) = build(BASE);
        step_round(&mut state, &truth, 1).unwrap();
        let isolate = Action::new(ActionKind::IsolateNode, Target::Node { node: "edge-0".into() }, BTreeMap::new());
        apply_intervention(&mut state, &isolate, 1).unwrap();
        let n = state.node_logs(&NodeId::from("edge-0")).len();
        for r in 2..6 {
            step_round(&mut state, &truth, r).unwrap();
        }
        assert_eq!(state.node_logs(&NodeId::from("edge-0")).len(), n);
        assert_eq!(state.tasks[&TaskId::from("train-0")].exec.host, NodeId::from("cloud-0"));
    }

    #[test]
    fn reroute_switches_uplink() {
        let text = BASE.to_string() + "\n[effects.reroute-link]\nrho = 1.0\n";
        let (mut state, _) = build(&text);
        let edge = NodeId::from("edge-0");
        assert_eq!(state.nodes[&edge].uplink, Some(0));
        let action = Action::new(ActionKind::RerouteLink, Target::Node { node: edge.clone() }, BTreeMap::new());
        apply_intervention(&mut state, &action, 1).unwrap();
        assert_eq!(state.nodes[&edge].uplink, Some(1));
        assert_eq!(state.nodes[&edge].spec.link_reliability, 0.5);
    }

    #[test]
    fn unknown_targets_are_errors() {
        let (mut state, _) = build(BASE);
        let action = Action::new(ActionKind::RestartNode, Target::Node { node: "ghost".into() }, BTreeMap::new());
        assert!(matches!(apply_intervention(&mut state, &action, 1), Err(SimError::UnknownNode(_))));
        state.finalize();
        assert!(matches!(apply_intervention(&mut state, &Action::do_nothing(), 1), Err(SimError::Finalized)));
    }
}
