//! Seeded experiments: run, summarise, plot and replay.

mod config;
mod metrics;
mod replay;
mod report;
mod run;

use std::path::Path;

use thiserror::Error;

pub use config::ExperimentConfig;
pub use metrics::{
    read_logs, skeleton_f1, summarize, tally_logs, tally_traces, MetricsSummary, Recovery, RoundMetrics, TaskTally,
    RECOVERY_THRESHOLD,
};
pub use replay::{replay, Divergence, Verdict};
pub use report::report;
pub use run::{
    round_dir, run_experiment, BASELINE_DIR, CONFIG_FILE, DECISIONS_FILE, LOGS_FILE, METRICS_FILE, REPORT_DIR,
    ROUND_FILES, SCENARIO_FILE, SUMMARY_FILE, TRACES_FILE,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("round {round}: {message}")]
    Runtime { round: u64, message: String },
    #[error("missing artifacts: {}", .0.join(", "))]
    MissingArtifacts(Vec<String>),
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("plot failed: {0}")]
    Plot(String),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
