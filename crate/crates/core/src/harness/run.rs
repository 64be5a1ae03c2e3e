use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::metrics::{summarize, MetricsSummary};
use super::{ExperimentConfig, HarnessError};
use crate::action::Action;
use crate::cfg::{to_cpt_dump, to_edge_list};
use crate::planner::{AgentState, RoundOutput};
use crate::seed::derive_seed;
use crate::sim::{apply_intervention, step_round, write_log_jsonl, ContinuumState, GroundTruthNet, RoundTrace, ScenarioConfig};

pub const CONFIG_FILE: &str = "config.toml";
pub const SCENARIO_FILE: &str = "scenario.toml";
pub const LOGS_FILE: &str = "logs.jsonl";
pub const TRACES_FILE: &str = "traces.jsonl";
pub const DECISIONS_FILE: &str = "decisions.jsonl";
pub const METRICS_FILE: &str = "metrics.tsv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const ERROR_FILE: &str = "error.json";
pub const BASELINE_DIR: &str = "baseline";
pub const REPORT_DIR: &str = "report";
pub const ROUND_FILES: [&str; 4] = ["graph.edges", "graph.cpt", "beliefs.jsonl", "features.tsv"];

pub fn round_dir(root: &Path, round: u64) -> PathBuf {
    root.join("rounds").join(format!("{round:04}"))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), HarnessError> {
    fs::write(path, contents).map_err(|e| HarnessError::io(path, e))
}

struct Jsonl {
    path: PathBuf,
    out: BufWriter<File>,
}

impl Jsonl {
    fn create(path: PathBuf) -> Result<Self, HarnessError> {
        let file = File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
        Ok(Jsonl { path, out: BufWriter::new(file) })
    }

    fn push<T: Serialize>(&mut self, value: &T) -> Result<(), HarnessError> {
        let line = serde_json::to_string(value).map_err(|e| HarnessError::Parse {
            path: self.path.display().to_string(),
            message: e.to_string(),
        })?;
        writeln!(self.out, "{line}")
            .and_then(|_| self.out.flush())
            .map_err(|e| HarnessError::io(&self.path, e))
    }
}

/// Clears `out` for a fresh run. Refuses a non-empty directory that does
/// not look like an earlier run.
fn prepare_out(out: &Path) -> Result<(), HarnessError> {
    if out.exists() {
        let non_empty = fs::read_dir(out).map_err(|e| HarnessError::io(out, e))?.next().is_some();
        if non_empty && !out.join(CONFIG_FILE).exists() {
            return Err(HarnessError::Config(format!(
                "{} is not empty and holds no earlier run",
                out.display()
            )));
        }
        fs::remove_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    }
    fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))
}

fn sim_seed(master: u64, round: u64) -> u64 {
    derive_seed(master, "sim", round)
}

fn step(state: &mut ContinuumState, truth: &GroundTruthNet, master: u64) -> Result<RoundTrace, HarnessError> {
    let round = state.round + 1;
    step_round(state, truth, sim_seed(master, round)).map_err(|e| HarnessError::Runtime {
        round,
        message: format!("simulate stage failed: {e}"),
    })
}

fn write_round(root: &Path, out: &RoundOutput) -> Result<(), HarnessError> {
    let dir = round_dir(root, out.decision.round);
    fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
    write(&dir.join(ROUND_FILES[0]), to_edge_list(&out.graph))?;
    write(&dir.join(ROUND_FILES[1]), to_cpt_dump(&out.graph))?;
    let mut beliefs = String::new();
    for inf in &out.inferences {
        beliefs.push_str(&serde_json::to_string(inf).expect("beliefs serialise"));
        beliefs.push('\n');
    }
    write(&dir.join(ROUND_FILES[2]), beliefs)?;
    write(&dir.join(ROUND_FILES[3]), out.features.to_tsv())
}

fn write_logs(dir: &Path, state: &ContinuumState) -> Result<(), HarnessError> {
    let path = dir.join(LOGS_FILE);
    let file = File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
    let mut w = BufWriter::new(file);
    write_log_jsonl(&mut w, &state.all_logs())
        .and_then(|_| w.flush())
        .map_err(|e| HarnessError::io(&path, e))
}

/// The do-nothing comparator: the same scenario and seeds, never acting.
fn run_baseline(scenario: &ScenarioConfig, rounds: u64, master: u64, dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let (mut state, truth) = scenario.build().map_err(|e| HarnessError::Config(e.to_string()))?;
    let mut traces = Jsonl::create(dir.join(TRACES_FILE))?;
    for _ in 0..scenario.bootstrap_rounds + rounds {
        let trace = step(&mut state, &truth, master)?;
        traces.push(&trace)?;
        let round = state.round;
        apply_intervention(&mut state, &Action::do_nothing(), 0).map_err(|e| HarnessError::Runtime {
            round,
            message: e.to_string(),
        })?;
    }
    state.finalize();
    write_logs(dir, &state)
}

/// Runs the bootstrap phase, then `rounds` agent rounds, persisting every
/// artifact under `config.out`; then the baseline, then the summary.
pub fn run_experiment(config: &ExperimentConfig) -> Result<MetricsSummary, HarnessError> {
    config.validate()?;
    let text = fs::read_to_string(&config.scenario).map_err(|e| HarnessError::io(&config.scenario, e))?;
    let scenario = ScenarioConfig::from_toml_str(&text).map_err(|e| HarnessError::Config(e.to_string()))?;
    let (mut state, truth) = scenario.build().map_err(|e| HarnessError::Config(e.to_string()))?;
    let master = config.seed.unwrap_or(scenario.seed);

    let out = &config.out;
    prepare_out(out)?;
    let stored = ExperimentConfig {
        scenario: PathBuf::from(SCENARIO_FILE),
        out: PathBuf::from("."),
        seed: Some(master),
        ..config.clone()
    };
    write(&out.join(CONFIG_FILE), stored.to_toml()?)?;
    write(&out.join(SCENARIO_FILE), &text)?;

    let result = run_rounds(config, &scenario, &mut state, &truth, master);
    state.finalize();
    write_logs(out, &state)?;
    if let Err(HarnessError::Runtime { round, message }) = &result {
        let body = serde_json::json!({ "round": round, "message": message });
        write(&out.join(ERROR_FILE), format!("{body}\n"))?;
    }
    result?;
    if config.baseline {
        run_baseline(&scenario, config.rounds, master, &out.join(BASELINE_DIR))?;
    }
    let summary = summarize(out)?;
    write(&out.join(METRICS_FILE), summary.per_round_tsv())?;
    write(&out.join(SUMMARY_FILE), summary.to_json())?;
    Ok(summary)
}

fn run_rounds(
    config: &ExperimentConfig,
    scenario: &ScenarioConfig,
    state: &mut ContinuumState,
    truth: &GroundTruthNet,
    master: u64,
) -> Result<(), HarnessError> {
    let out = &config.out;
    let mut traces = Jsonl::create(out.join(TRACES_FILE))?;
    let mut decisions = Jsonl::create(out.join(DECISIONS_FILE))?;
    for _ in 0..scenario.bootstrap_rounds {
        traces.push(&step(state, truth, master)?)?;
    }
    let mut agent = AgentState::bootstrap(config.agent.clone(), state, &scenario.metric_catalog(), master).map_err(|e| {
        HarnessError::Runtime {
            round: state.round,
            message: e.to_string(),
        }
    })?;
    for _ in 0..config.rounds {
        traces.push(&step(state, truth, master)?)?;
        let output = agent.agent_round(state).map_err(|e| HarnessError::Runtime {
            round: state.round,
            message: e.to_string(),
        })?;
        log::info!("round {}: {}", output.decision.round, output.decision.chosen);
        write_round(out, &output)?;
        decisions.push(&output.decision)?;
    }
    Ok(())
}
