//! Scenario files: topology, tasks, hidden truth net, hazards and scripted
//! injections, as TOML.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::state::{ContinuumState, Injection, NodeState, TaskRecord};
use super::truth::{GroundTruthNet, TruthKind, TruthVariable};
use super::types::{
    Link, NodeId, NodeSpec, Phase, TaskExecution, TaskId, TaskSpec, Tier, CONTROL_SOURCE,
};
use super::SimError;
use crate::action::ActionKind;
use crate::logs::{MetricCatalog, MetricMeta, VarKind};

fn default_energy() -> f64 {
    1.0
}

fn default_reliability() -> f64 {
    1.0
}

fn default_states() -> usize {
    2
}

fn default_true() -> bool {
    true
}

fn default_pipeline() -> Vec<String> {
    ["data-load", "forward", "backward", "update"]
        .into_iter()
        .map(String::from)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    pub id: String,
    pub tier: Tier,
    #[serde(default)]
    pub capacity: f64,
    #[serde(default = "default_energy")]
    pub energy: f64,
    #[serde(default)]
    pub mobile: bool,
    #[serde(default = "default_reliability")]
    pub link_reliability: f64,
    /// Energy lost per round (mobile nodes).
    #[serde(default)]
    pub drain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub a: String,
    pub b: String,
    #[serde(default = "default_reliability")]
    pub reliability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub id: String,
    pub host: String,
    pub workload: f64,
    #[serde(default)]
    pub input_deps: Vec<String>,
    #[serde(default)]
    pub mapping: String,
    pub deadline: u32,
    #[serde(default = "default_pipeline")]
    pub subtasks: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthVarConfig {
    pub name: String,
    pub kind: TruthKind,
    #[serde(default = "default_states")]
    pub states: usize,
    #[serde(default)]
    pub parents: Vec<String>,
    #[serde(default)]
    pub cpt: Vec<Vec<f64>>,
    #[serde(default)]
    pub emission: Vec<[f64; 2]>,
    #[serde(default = "default_true")]
    pub higher_is_worse: bool,
    #[serde(default)]
    pub persistent: bool,
    #[serde(default)]
    pub compute_only: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthConfig {
    pub variables: Vec<TruthVarConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeHazardConfig {
    pub node: String,
    pub fault: String,
    pub hazard: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InjectionPhase {
    Bootstrap,
    Agent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectionConfig {
    pub phase: InjectionPhase,
    pub round: u64,
    pub node: String,
    pub fault: String,
    /// Scripted repair after this many rounds.
    #[serde(default)]
    pub duration: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EffectConfig {
    /// Probability that the action takes effect.
    pub rho: f64,
    /// Persistent faults on the target node cleared when it does.
    #[serde(default)]
    pub clears: Vec<String>,
}

impl EffectConfig {
    fn new(rho: f64, clears: &[&str]) -> Self {
        EffectConfig {
            rho,
            clears: clears.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Real (simulated) effect of each action type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", default)]
pub struct EffectsConfig {
    pub restart_node: EffectConfig,
    pub reassign_task: EffectConfig,
    pub reroute_link: EffectConfig,
    pub reduce_load: EffectConfig,
    pub isolate_node: EffectConfig,
    pub escalate_human: EffectConfig,
}

impl Default for EffectsConfig {
    fn default() -> Self {
        EffectsConfig {
            restart_node: EffectConfig::new(0.9, &["crash"]),
            reassign_task: EffectConfig::new(0.9, &[]),
            reroute_link: EffectConfig::new(0.9, &["comm-error"]),
            reduce_load: EffectConfig::new(0.9, &["resource-denied"]),
            isolate_node: EffectConfig::new(1.0, &[]),
            escalate_human: EffectConfig::new(0.0, &[]),
        }
    }
}

impl EffectsConfig {
    pub fn get(&self, kind: ActionKind) -> Option<&EffectConfig> {
        match kind {
            ActionKind::DoNothing => None,
            ActionKind::RestartNode => Some(&self.restart_node),
            ActionKind::ReassignTask => Some(&self.reassign_task),
            ActionKind::RerouteLink => Some(&self.reroute_link),
            ActionKind::ReduceLoad => Some(&self.reduce_load),
            ActionKind::IsolateNode => Some(&self.isolate_node),
            ActionKind::EscalateHuman => Some(&self.escalate_human),
        }
    }
}

fn default_link_fault() -> Option<String> {
    Some("comm-error".into())
}

fn default_low_energy_fault() -> Option<String> {
    Some("crash".into())
}

fn default_blocking() -> Vec<String> {
    vec!["crash".into(), "task-fail".into(), "user-abort".into()]
}

fn default_alpha_blocking() -> Vec<String> {
    vec!["comm-error".into()]
}

/// How sampled faults interact with nodes and tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsConfig {
    /// Fault whose node-level hazard is `1 - link_reliability`.
    #[serde(default = "default_link_fault")]
    pub link_fault: Option<String>,
    pub low_energy_threshold: f64,
    #[serde(default = "default_low_energy_fault")]
    pub low_energy_fault: Option<String>,
    pub low_energy_hazard: f64,
    /// Faults that stop hosted tasks from advancing.
    #[serde(default = "default_blocking")]
    pub blocking: Vec<String>,
    /// Faults that only stall tasks still in initiation.
    #[serde(default = "default_alpha_blocking")]
    pub alpha_blocking: Vec<String>,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        DynamicsConfig {
            link_fault: default_link_fault(),
            low_energy_threshold: 0.1,
            low_energy_fault: default_low_energy_fault(),
            low_energy_hazard: 0.5,
            blocking: default_blocking(),
            alpha_blocking: default_alpha_blocking(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub bootstrap_rounds: u64,
    pub nodes: Vec<NodeConfig>,
    #[serde(default)]
    pub links: Vec<LinkConfig>,
    #[serde(default)]
    pub tasks: Vec<TaskConfig>,
    pub truth: TruthConfig,
    #[serde(default)]
    pub hazards: BTreeMap<String, f64>,
    #[serde(default)]
    pub node_hazards: Vec<NodeHazardConfig>,
    #[serde(default)]
    pub injections: Vec<InjectionConfig>,
    #[serde(default)]
    pub effects: EffectsConfig,
    #[serde(default)]
    pub dynamics: DynamicsConfig,
}

fn err(field: impl Into<String>, message: impl Into<String>) -> SimError {
    SimError::Config {
        field: field.into(),
        message: message.into(),
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        toml::from_str(text).map_err(|e| err("scenario", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| err("scenario", format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Builds the truth net with root hazards applied.
    pub fn truth_net(&self) -> Result<GroundTruthNet, SimError> {
        let names: BTreeMap<&str, usize> = self
            .truth
            .variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name.as_str(), i))
            .collect();
        let mut vars = Vec::with_capacity(self.truth.variables.len());
        for (i, v) in self.truth.variables.iter().enumerate() {
            let parents = v
                .parents
                .iter()
                .map(|p| {
                    names
                        .get(p.as_str())
                        .copied()
                        .ok_or_else(|| err(format!("truth.variables[{i}].parents"), format!("unknown variable '{p}'")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let mut cpt = v.cpt.clone();
            if cpt.is_empty() && parents.is_empty() {
                // Root without a table: nominal unless a hazard says otherwise.
                let mut row = vec![0.0; v.states];
                row[0] = 1.0;
                cpt.push(row);
            }
            vars.push(TruthVariable {
                name: v.name.clone(),
                kind: v.kind,
                arity: v.states,
                parents,
                cpt,
                emission: v.emission.iter().map(|[lo, hi]| (*lo, *hi)).collect(),
                higher_is_worse: v.higher_is_worse,
                persistent: v.persistent,
                compute_only: v.compute_only,
            });
        }
        GroundTruthNet::new(vars)?.with_hazards(&self.hazards)
    }

    /// Metric metadata the agent is allowed to know (names, hw/sw, polarity).
    pub fn metric_catalog(&self) -> MetricCatalog {
        self.truth
            .variables
            .iter()
            .filter_map(|v| {
                let kind = match v.kind {
                    TruthKind::Fault => return None,
                    TruthKind::Hw => VarKind::HwContext,
                    TruthKind::Sw => VarKind::SwContext,
                };
                Some((
                    v.name.clone(),
                    MetricMeta {
                        kind,
                        higher_is_worse: v.higher_is_worse,
                    },
                ))
            })
            .collect()
    }

    fn validate(&self, truth: &GroundTruthNet) -> Result<(), SimError> {
        if self.nodes.is_empty() {
            return Err(err("nodes", "at least one node is required"));
        }
        let mut ids = BTreeSet::new();
        for (i, n) in self.nodes.iter().enumerate() {
            let f = format!("nodes[{i}]");
            if n.id.is_empty() || n.id == CONTROL_SOURCE {
                return Err(err(format!("{f}.id"), format!("'{}' is not a usable node id", n.id)));
            }
            if !ids.insert(n.id.as_str()) {
                return Err(err(format!("{f}.id"), format!("duplicate node '{}'", n.id)));
            }
            if !(n.capacity >= 0.0) {
                return Err(err(format!("{f}.capacity"), "must be >= 0"));
            }
            if n.tier == Tier::Sensor && n.capacity != 0.0 {
                return Err(err(format!("{f}.capacity"), "sensor nodes have no compute capacity"));
            }
            if !(0.0..=1.0).contains(&n.energy) {
                return Err(err(format!("{f}.energy"), "must lie in [0,1]"));
            }
            if !(0.0..=1.0).contains(&n.link_reliability) {
                return Err(err(format!("{f}.link_reliability"), "must lie in [0,1]"));
            }
            if !(n.drain >= 0.0) {
                return Err(err(format!("{f}.drain"), "must be >= 0"));
            }
        }
        for (i, l) in self.links.iter().enumerate() {
            for end in [&l.a, &l.b] {
                if !ids.contains(end.as_str()) {
                    return Err(err(format!("links[{i}]"), format!("unknown node '{end}'")));
                }
            }
            if !(0.0..=1.0).contains(&l.reliability) {
                return Err(err(format!("links[{i}].reliability"), "must lie in [0,1]"));
            }
        }
        let mut task_ids = BTreeSet::new();
        for (i, t) in self.tasks.iter().enumerate() {
            let f = format!("tasks[{i}]");
            if !task_ids.insert(t.id.as_str()) {
                return Err(err(format!("{f}.id"), format!("duplicate task '{}'", t.id)));
            }
            let host = self
                .nodes
                .iter()
                .find(|n| n.id == t.host)
                .ok_or_else(|| err(format!("{f}.host"), format!("unknown node '{}'", t.host)))?;
            if host.capacity < t.workload {
                return Err(err(format!("{f}.host"), format!("'{}' lacks capacity for the workload", t.host)));
            }
            if !(t.workload > 0.0) {
                return Err(err(format!("{f}.workload"), "must be > 0"));
            }
            if t.deadline == 0 {
                return Err(err(format!("{f}.deadline"), "must be > 0"));
            }
            if t.subtasks.is_empty() {
                return Err(err(format!("{f}.subtasks"), "pipeline must not be empty"));
            }
        }
        for (h, nh) in self.node_hazards.iter().enumerate() {
            let f = format!("node_hazards[{h}]");
            if !ids.contains(nh.node.as_str()) {
                return Err(err(format!("{f}.node"), format!("unknown node '{}'", nh.node)));
            }
            if truth.index_of(&nh.fault).is_none() {
                return Err(err(format!("{f}.fault"), format!("unknown truth variable '{}'", nh.fault)));
            }
            if !(0.0..=1.0).contains(&nh.hazard) {
                return Err(err(format!("{f}.hazard"), "must lie in [0,1]"));
            }
        }
        for (k, inj) in self.injections.iter().enumerate() {
            let f = format!("injections[{k}]");
            if !ids.contains(inj.node.as_str()) {
                return Err(err(format!("{f}.node"), format!("unknown node '{}'", inj.node)));
            }
            match truth.index_of(&inj.fault) {
                Some(v) if truth.variables()[v].is_fault() => {}
                _ => return Err(err(format!("{f}.fault"), format!("'{}' is not a fault variable", inj.fault))),
            }
            if inj.round == 0 {
                return Err(err(format!("{f}.round"), "rounds are numbered from 1"));
            }
            if inj.phase == InjectionPhase::Bootstrap && inj.round > self.bootstrap_rounds {
                return Err(err(format!("{f}.round"), "beyond the bootstrap phase"));
            }
        }
        for kind in ActionKind::ALL {
            if let Some(effect) = self.effects.get(kind) {
                if !(0.0..=1.0).contains(&effect.rho) {
                    return Err(err(format!("effects.{kind}.rho"), "must lie in [0,1]"));
                }
            }
        }
        Ok(())
    }

    /// Validates the scenario and builds the initial state.
    pub fn build(&self) -> Result<(ContinuumState, GroundTruthNet), SimError> {
        let truth = self.truth_net()?;
        self.validate(&truth)?;
        Ok((build_continuum(self, &truth), truth))
    }
}

fn build_continuum(scenario: &ScenarioConfig, _truth: &GroundTruthNet) -> ContinuumState {
    let links: Vec<Link> = scenario
        .links
        .iter()
        .map(|l| Link {
            a: NodeId::from(l.a.as_str()),
            b: NodeId::from(l.b.as_str()),
            reliability: l.reliability,
        })
        .collect();
    let nodes = scenario
        .nodes
        .iter()
        .map(|n| {
            let id = NodeId::from(n.id.as_str());
            let uplink = links.iter().position(|l| l.touches(&id));
            let link_reliability = uplink.map_or(n.link_reliability, |i| links[i].reliability);
            let spec = NodeSpec {
                id: id.clone(),
                tier: n.tier,
                capacity: n.capacity,
                energy: n.energy,
                mobile: n.mobile,
                link_reliability,
                isolated: false,
            };
            (id, NodeState::new(spec, uplink, n.drain))
        })
        .collect();
    let tasks = scenario
        .tasks
        .iter()
        .map(|t| {
            let id = TaskId::from(t.id.as_str());
            let spec = TaskSpec {
                id: id.clone(),
                workload: t.workload,
                input_deps: t.input_deps.iter().cloned().collect(),
                mapping: t.mapping.clone(),
                deadline: t.deadline,
                subtasks: t.subtasks.clone(),
            };
            let exec = TaskExecution {
                task: id.clone(),
                host: NodeId::from(t.host.as_str()),
                phase: Phase::Alpha,
                subtask: 0,
                rounds_elapsed: 0,
                instance: 0,
                missed: false,
            };
            (id, TaskRecord::new(spec, exec))
        })
        .collect();
    let injections = scenario
        .injections
        .iter()
        .map(|i| Injection {
            round: match i.phase {
                InjectionPhase::Bootstrap => i.round,
                InjectionPhase::Agent => scenario.bootstrap_rounds + i.round,
            },
            node: NodeId::from(i.node.as_str()),
            fault: i.fault.clone(),
            duration: i.duration,
        })
        .collect();
    let node_hazards = scenario
        .node_hazards
        .iter()
        .map(|h| (NodeId::from(h.node.as_str()), h.fault.clone(), h.hazard))
        .collect();
    ContinuumState::new(
        nodes,
        links,
        tasks,
        injections,
        node_hazards,
        scenario.effects.clone(),
        scenario.dynamics.clone(),
    )
}
