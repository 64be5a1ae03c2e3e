use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io::BufReader;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::run::{round_dir, BASELINE_DIR, DECISIONS_FILE, LOGS_FILE, ROUND_FILES, SCENARIO_FILE, TRACES_FILE};
use super::HarnessError;
use crate::cfg::parse_edge_list;
use crate::planner::{DecisionRecord, NodeInference};
use crate::sim::{read_log_jsonl, EventType, GroundTruthNet, LogEntry, RoundTrace, ScenarioConfig, TaskId};
use crate::inference::DETECTION_THRESHOLD;

/// Belief level under which a fault counts as cleared.
pub const RECOVERY_THRESHOLD: f64 = 0.2;

/// Task instances resolved in a range of rounds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskTally {
    pub hits: u64,
    pub misses: u64,
}

impl TaskTally {
    /// Fraction of resolved instances that met their deadline.
    pub fn rate(&self) -> Option<f64> {
        let n = self.hits + self.misses;
        (n > 0).then(|| self.hits as f64 / n as f64)
    }
}

#[derive(Default)]
struct Tracker {
    missed: BTreeSet<TaskId>,
    tally: TaskTally,
}

impl Tracker {
    fn complete(&mut self, task: &TaskId, counted: bool) {
        if !self.missed.remove(task) && counted {
            self.tally.hits += 1;
        }
    }

    fn miss(&mut self, task: &TaskId, counted: bool) {
        self.missed.insert(task.clone());
        if counted {
            self.tally.misses += 1;
        }
    }
}

/// Instances resolved after `after` (a miss resolves an instance the
/// moment it happens), from the simulator's round traces.
pub fn tally_traces(traces: &[RoundTrace], after: u64, upto: u64) -> TaskTally {
    let mut t = Tracker::default();
    for tr in traces.iter().filter(|tr| tr.round <= upto) {
        let counted = tr.round > after;
        for task in &tr.completed {
            t.complete(task, counted);
        }
        for task in &tr.missed {
            t.miss(task, counted);
        }
    }
    t.tally
}

/// The same tally recomputed from raw log events.
pub fn tally_logs(entries: &[LogEntry], after: u64) -> TaskTally {
    let mut t = Tracker::default();
    for e in entries {
        let Some(task) = &e.task else { continue };
        let counted = e.round > after;
        match e.event {
            EventType::TaskComplete => t.complete(task, counted),
            EventType::DeadlineMiss => t.miss(task, counted),
            _ => {}
        }
    }
    t.tally
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recovery {
    pub node: String,
    pub fault: String,
    pub injected: u64,
    /// First round with the fault gone and believed gone.
    pub recovered: Option<u64>,
    /// Rounds to recovery; runs to the end of the experiment when unrecovered.
    pub rounds: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub round: u64,
    pub chosen: String,
    pub hit_rate: Option<f64>,
    pub baseline_hit_rate: Option<f64>,
    pub free_energy: f64,
    /// (node, fault) pairs believed active.
    pub detected: usize,
    /// (node, fault) pairs truly active.
    pub active: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub rounds: u64,
    pub bootstrap_rounds: u64,
    pub deadline_hit_rate: Option<f64>,
    pub baseline_hit_rate: Option<f64>,
    pub tasks: TaskTally,
    pub baseline_tasks: Option<TaskTally>,
    pub mean_time_to_recovery: Option<f64>,
    pub recoveries: Vec<Recovery>,
    pub actions: BTreeMap<String, u64>,
    /// Σ over nodes of the converged F, per round.
    pub free_energy: Vec<f64>,
    pub detection_precision: Option<f64>,
    pub detection_recall: Option<f64>,
    pub skeleton_f1: Option<f64>,
    pub per_round: Vec<RoundMetrics>,
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

impl MetricsSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serialises") + "\n"
    }

    pub fn per_round_tsv(&self) -> String {
        let mut out = String::from("round\tchosen\thit_rate\tbaseline_hit_rate\tfree_energy\tdetected\tactive\n");
        for r in &self.per_round {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.round,
                r.chosen,
                opt(r.hit_rate),
                opt(r.baseline_hit_rate),
                r.free_energy,
                r.detected,
                r.active
            );
        }
        out
    }
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    text.lines()
        .filter(|l| !l.is_empty())
        .map(|l| {
            serde_json::from_str(l).map_err(|e| HarnessError::Parse {
                path: path.display().to_string(),
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn read_logs(path: &Path) -> Result<Vec<LogEntry>, HarnessError> {
    let file = fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
    read_log_jsonl(BufReader::new(file)).map_err(|e| HarnessError::io(path, e))
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Undirected F1 between learned and true edges over shared variable names.
pub fn skeleton_f1(learned: &[(String, String)], truth: &GroundTruthNet, shared: &BTreeSet<String>) -> Option<f64> {
    let key = |a: &str, b: &str| if a < b { (a.to_string(), b.to_string()) } else { (b.to_string(), a.to_string()) };
    let vars = truth.variables();
    let true_edges: BTreeSet<(String, String)> = vars
        .iter()
        .flat_map(|v| v.parents.iter().map(move |&p| key(&vars[p].name, &v.name)))
        .filter(|(a, b)| shared.contains(a) && shared.contains(b))
        .collect();
    let found: BTreeSet<(String, String)> = learned
        .iter()
        .map(|(a, b)| key(a, b))
        .filter(|(a, b)| shared.contains(a) && shared.contains(b))
        .collect();
    let tp = found.intersection(&true_edges).count() as f64;
    let denom = found.len() as f64 + true_edges.len() as f64;
    (denom > 0.0).then(|| 2.0 * tp / denom)
}

/// Recomputes the summary from an artifact directory.
pub fn summarize(dir: &Path) -> Result<MetricsSummary, HarnessError> {
    if !dir.is_dir() {
        return Err(HarnessError::MissingArtifacts(vec![dir.display().to_string()]));
    }
    let required = [SCENARIO_FILE, TRACES_FILE, DECISIONS_FILE, LOGS_FILE];
    let absent: Vec<String> = required
        .iter()
        .filter(|f| !dir.join(f).exists())
        .map(|f| f.to_string())
        .collect();
    if !absent.is_empty() {
        return Err(HarnessError::MissingArtifacts(absent));
    }
    let scenario = ScenarioConfig::load(&dir.join(SCENARIO_FILE)).map_err(|e| HarnessError::Config(e.to_string()))?;
    let truth = scenario.truth_net().map_err(|e| HarnessError::Config(e.to_string()))?;
    let boot = scenario.bootstrap_rounds;
    let traces: Vec<RoundTrace> = read_jsonl(&dir.join(TRACES_FILE))?;
    let decisions: Vec<DecisionRecord> = read_jsonl(&dir.join(DECISIONS_FILE))?;
    if decisions.is_empty() {
        return Err(HarnessError::MissingArtifacts(vec!["no completed rounds".into()]));
    }
    let missing: Vec<String> = decisions
        .iter()
        .flat_map(|d| {
            let rd = round_dir(dir, d.round);
            ROUND_FILES
                .iter()
                .filter(move |f| !rd.join(f).exists())
                .map(move |f| format!("round {}: {f}", d.round))
        })
        .collect();
    if !missing.is_empty() {
        return Err(HarnessError::MissingArtifacts(missing));
    }
    let last = decisions.last().expect("non-empty").round;
    let baseline: Option<Vec<RoundTrace>> = {
        let p = dir.join(BASELINE_DIR).join(TRACES_FILE);
        if p.exists() {
            Some(read_jsonl(&p)?)
        } else {
            None
        }
    };
    let by_round: BTreeMap<u64, &RoundTrace> = traces.iter().map(|t| (t.round, t)).collect();
    let fault_names: BTreeSet<&str> = truth
        .variables()
        .iter()
        .filter(|v| v.is_fault())
        .map(|v| v.name.as_str())
        .collect();

    let mut per_round = Vec::with_capacity(decisions.len());
    let mut free_energy = Vec::with_capacity(decisions.len());
    let mut actions: BTreeMap<String, u64> = BTreeMap::new();
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    for d in &decisions {
        let trace = by_round.get(&d.round).ok_or_else(|| {
            HarnessError::MissingArtifacts(vec![format!("round {}: trace", d.round)])
        })?;
        let beliefs: Vec<NodeInference> = read_jsonl(&round_dir(dir, d.round).join(ROUND_FILES[2]))?;
        let f: f64 = beliefs.iter().map(|b| b.belief.free_energy).sum();
        free_energy.push(f);
        let kind = d.chosen.split(':').next().unwrap_or_default().to_string();
        *actions.entry(kind).or_default() += 1;
        let mut detected = 0;
        for (node, faults) in &d.beliefs {
            if !trace.samples.iter().any(|s| &s.node == node) {
                continue;
            }
            for (fault, &q) in faults.iter().filter(|(f, _)| fault_names.contains(f.as_str())) {
                let predicted = q > DETECTION_THRESHOLD;
                let actual = trace.fault_active(node, fault);
                detected += predicted as usize;
                match (predicted, actual) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_ += 1,
                    _ => {}
                }
            }
        }
        let active = trace.samples.iter().map(|s| s.active_faults.len()).sum();
        per_round.push(RoundMetrics {
            round: d.round,
            chosen: d.chosen.clone(),
            hit_rate: tally_traces(&traces, boot, d.round).rate(),
            baseline_hit_rate: baseline.as_ref().and_then(|b| tally_traces(b, boot, d.round).rate()),
            free_energy: f,
            detected,
            active,
        });
    }

    let decision_at: BTreeMap<u64, &DecisionRecord> = decisions.iter().map(|d| (d.round, d)).collect();
    let mut recoveries = Vec::new();
    for tr in traces.iter().filter(|t| t.round > boot) {
        for inj in &tr.injected {
            let recovered = (tr.round + 1..=last).find(|r| {
                let gone = by_round.get(r).is_some_and(|t| !t.fault_active(&inj.node, &inj.fault));
                let believed = decision_at.get(r).is_some_and(|d| {
                    d.beliefs
                        .get(&inj.node)
                        .and_then(|b| b.get(&inj.fault))
                        .is_none_or(|&q| q < RECOVERY_THRESHOLD)
                });
                gone && believed
            });
            recoveries.push(Recovery {
                node: inj.node.to_string(),
                fault: inj.fault.clone(),
                injected: tr.round,
                recovered,
                rounds: recovered.unwrap_or(last + 1) - tr.round,
            });
        }
    }
    let mean_time_to_recovery =
        (!recoveries.is_empty()).then(|| recoveries.iter().map(|r| r.rounds as f64).sum::<f64>() / recoveries.len() as f64);

    let final_edges = fs::read_to_string(round_dir(dir, last).join(ROUND_FILES[0]))
        .map_err(|e| HarnessError::io(&round_dir(dir, last), e))?;
    let (_, vars, dag) = parse_edge_list(&final_edges).map_err(|e| HarnessError::Parse {
        path: format!("round {last}: {}", ROUND_FILES[0]),
        message: e.to_string(),
    })?;
    let learned: Vec<(String, String)> = dag
        .edges()
        .into_iter()
        .map(|(a, b)| (vars[a].id.clone(), vars[b].id.clone()))
        .collect();
    let shared: BTreeSet<String> = vars
        .iter()
        .filter(|v| truth.index_of(&v.id).is_some())
        .map(|v| v.id.clone())
        .collect();

    let tasks = tally_traces(&traces, boot, last);
    let baseline_tasks = baseline.as_ref().map(|b| tally_traces(b, boot, last));
    Ok(MetricsSummary {
        rounds: decisions.len() as u64,
        bootstrap_rounds: boot,
        deadline_hit_rate: tasks.rate(),
        baseline_hit_rate: baseline_tasks.and_then(|t| t.rate()),
        tasks,
        baseline_tasks,
        mean_time_to_recovery,
        recoveries,
        actions,
        free_energy,
        detection_precision: ratio(tp, tp + fp),
        detection_recall: ratio(tp, tp + fn_),
        skeleton_f1: skeleton_f1(&learned, &truth, &shared),
        per_round,
    })
}
