use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::run::{run_experiment, CONFIG_FILE, REPORT_DIR, SCENARIO_FILE};
use super::{ExperimentConfig, HarnessError};

/// First byte-level difference between a stored and a regenerated tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Divergence {
    pub file: String,
    /// Round, for per-round artifacts.
    pub round: Option<u64>,
    /// 1-based line of the first differing byte; `None` when the file is
    /// missing on one side.
    pub line: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub files: usize,
    pub divergence: Option<Divergence>,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.divergence.is_none()
    }
}

/// Relative paths of all files under `root`, sorted, excluding reports.
fn files(root: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let mut out = Vec::new();
    let mut stack = vec![PathBuf::new()];
    while let Some(rel) = stack.pop() {
        let abs = root.join(&rel);
        for entry in fs::read_dir(&abs).map_err(|e| HarnessError::io(&abs, e))? {
            let entry = entry.map_err(|e| HarnessError::io(&abs, e))?;
            let name = rel.join(entry.file_name());
            if entry.path().is_dir() {
                if name != Path::new(REPORT_DIR) {
                    stack.push(name);
                }
            } else {
                out.push(name);
            }
        }
    }
    out.sort();
    Ok(out)
}

fn round_of(rel: &Path) -> Option<u64> {
    let mut parts = rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned());
    (parts.next()? == "rounds").then_some(())?;
    parts.next()?.parse().ok()
}

fn divergence(rel: &Path, line: Option<usize>) -> Divergence {
    Divergence {
        file: rel.display().to_string(),
        round: round_of(rel),
        line,
    }
}

/// Re-runs the stored configuration into a scratch directory and compares
/// every artifact byte for byte.
pub fn replay(dir: &Path) -> Result<Verdict, HarnessError> {
    let cfg_path = dir.join(CONFIG_FILE);
    if !cfg_path.exists() {
        return Err(HarnessError::Config(format!("{} has no {CONFIG_FILE}", dir.display())));
    }
    let text = fs::read_to_string(&cfg_path).map_err(|e| HarnessError::io(&cfg_path, e))?;
    let mut cfg = ExperimentConfig::from_toml_str(&text)?;
    cfg.scenario = dir.join(SCENARIO_FILE);
    let scratch = tempfile::tempdir().map_err(|e| HarnessError::io(Path::new("temporary directory"), e))?;
    cfg.out = scratch.path().join("replay");
    match run_experiment(&cfg) {
        // A stored failure must fail the same way; the comparison shows it.
        Ok(_) | Err(HarnessError::Runtime { .. }) => {}
        Err(e) => return Err(e),
    }

    let stored = files(dir)?;
    let fresh = files(&cfg.out)?;
    let count = stored.len().max(fresh.len());
    let mut all: Vec<&PathBuf> = stored.iter().chain(fresh.iter()).collect();
    all.sort();
    all.dedup();
    for rel in all {
        let (a, b) = (dir.join(rel), cfg.out.join(rel));
        if !a.exists() || !b.exists() {
            return Ok(Verdict {
                files: count,
                divergence: Some(divergence(rel, None)),
            });
        }
        let x = fs::read(&a).map_err(|e| HarnessError::io(&a, e))?;
        let y = fs::read(&b).map_err(|e| HarnessError::io(&b, e))?;
        if x != y {
            let at = x.iter().zip(&y).position(|(p, q)| p != q).unwrap_or(x.len().min(y.len()));
            let line = 1 + x[..at].iter().filter(|&&c| c == b'\n').count();
            return Ok(Verdict {
                files: count,
                divergence: Some(divergence(rel, Some(line))),
            });
        }
    }
    Ok(Verdict {
        files: count,
        divergence: None,
    })
}
