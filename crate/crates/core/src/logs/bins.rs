use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{LogError, VarKind};
use crate::sim::{LogEntry, FAULT_EVENTS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricMeta {
    pub kind: VarKind,
    pub higher_is_worse: bool,
}

/// What the agent knows about each metric: name, hw/sw side, polarity.
pub type MetricCatalog = BTreeMap<String, MetricMeta>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricBins {
    pub name: String,
    pub kind: VarKind,
    pub higher_is_worse: bool,
    /// Strictly increasing.
    pub thresholds: Vec<f64>,
    pub degenerate: bool,
}

impl MetricBins {
    pub fn arity(&self) -> usize {
        self.thresholds.len() + 1
    }

    /// Number of thresholds strictly below `value`.
    pub fn bin(&self, value: f64) -> u8 {
        self.thresholds.partition_point(|&t| t < value) as u8
    }

    /// Bin regarded as healthy operation.
    pub fn nominal_bin(&self) -> u8 {
        if self.higher_is_worse {
            0
        } else {
            (self.arity() - 1) as u8
        }
    }
}

/// Frozen discretisation: metric thresholds plus the fault vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    pub k: usize,
    pub metrics: Vec<MetricBins>,
    pub faults: Vec<String>,
}

impl BinSpec {
    pub fn metric(&self, name: &str) -> Option<&MetricBins> {
        self.metrics.iter().find(|m| m.name == name)
    }
}

/// Linear-interpolation quantile of sorted data (`p` in [0,1]).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of empty data");
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Quantile thresholds at i/K, deduplicated.
pub fn thresholds(values: &[f64], k: usize) -> Vec<f64> {
    if values.is_empty() {
        return Vec::new();
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(k.saturating_sub(1));
    for i in 1..k {
        let t = quantile(&sorted, i as f64 / k as f64);
        if out.last().is_none_or(|&last| t > last) {
            out.push(t);
        }
    }
    // A threshold at the maximum would leave its upper bin empty.
    while out.last().is_some_and(|&t| t >= sorted[sorted.len() - 1]) {
        out.pop();
    }
    out
}

/// Fits per-metric thresholds from bootstrap logs.
///
/// Metrics in `catalog` with fewer than `k` samples or a single value become
/// single-bin columns flagged degenerate.
pub fn fit_bins<'a, I>(entries: I, catalog: &MetricCatalog, k: usize) -> Result<BinSpec, LogError>
where
    I: IntoIterator<Item = &'a LogEntry>,
{
    if k == 0 {
        return Err(LogError::InvalidBins("K must be at least 1".into()));
    }
    let mut samples: BTreeMap<&str, Vec<f64>> = catalog.keys().map(|k| (k.as_str(), Vec::new())).collect();
    for e in entries {
        for (name, &v) in &e.metrics {
            if let Some(vals) = samples.get_mut(name.as_str()) {
                if v.is_finite() {
                    vals.push(v);
                }
            }
        }
    }
    let metrics = samples
        .into_iter()
        .map(|(name, values)| {
            let meta = catalog[name];
            let thresholds = if values.len() < k { Vec::new() } else { thresholds(&values, k) };
            let degenerate = thresholds.is_empty() && k > 1;
            if degenerate {
                log::warn!("metric {name} is degenerate ({} samples)", values.len());
            }
            MetricBins {
                name: name.to_string(),
                kind: meta.kind,
                higher_is_worse: meta.higher_is_worse,
                thresholds,
                degenerate,
            }
        })
        .collect();
    Ok(BinSpec {
        k,
        metrics,
        faults: FAULT_EVENTS.iter().map(|s| s.to_string()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Severity;

    #[test]
    fn quantiles_of_one_to_nine() {
        let values: Vec<f64> = (1..=9).map(f64::from).collect();
        let t = thresholds(&values, 3);
        assert_eq!(t.len(), 2);
        assert!((t[0] - 11.0 / 3.0).abs() < 1e-12);
        assert!((t[1] - 19.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn binning_uses_strict_threshold_comparison() {
        let b = MetricBins {
            name: "exec_time".into(),
            kind: VarKind::SwContext,
            higher_is_worse: true,
            thresholds: vec![11.0 / 3.0, 19.0 / 3.0],
            degenerate: false,
        };
        assert_eq!(b.bin(7.0), 2);
        assert_eq!(b.bin(1.0), 0);
        assert_eq!(b.bin(11.0 / 3.0), 0);
        assert_eq!(b.nominal_bin(), 0);
    }

    fn telemetry(v: f64) -> LogEntry {
        LogEntry {
            node: "n".into(),
            ts: 1,
            round: 1,
            event: "telemetry".into(),
            severity: Severity::Info,
            task: None,
            metrics: [("temperature".to_string(), v)].into(),
        }
    }

    fn catalog() -> MetricCatalog {
        [(
            "temperature".to_string(),
            MetricMeta {
                kind: VarKind::HwContext,
                higher_is_worse: true,
            },
        )]
        .into()
    }

    #[test]
    fn constant_metric_is_degenerate() {
        let logs: Vec<LogEntry> = (0..10).map(|_| telemetry(5.0)).collect();
        let spec = fit_bins(&logs, &catalog(), 3).unwrap();
        let m = spec.metric("temperature").unwrap();
        assert_eq!(m.arity(), 1);
        assert!(m.degenerate);
    }

    #[test]
    fn single_bin_requested() {
        let logs: Vec<LogEntry> = (0..10).map(|i| telemetry(i as f64)).collect();
        let spec = fit_bins(&logs, &catalog(), 1).unwrap();
        let m = spec.metric("temperature").unwrap();
        assert!(m.thresholds.is_empty());
        assert!(!m.degenerate);
        assert!(fit_bins(&logs, &catalog(), 0).is_err());
    }
}
