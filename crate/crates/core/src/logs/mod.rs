//! Checkpoint-anchored log collection and discretisation.

mod bins;
mod collect;
mod features;

use thiserror::Error;

pub use bins::{fit_bins, quantile, thresholds, BinSpec, MetricBins, MetricCatalog, MetricMeta};
pub use collect::{collect_from, collect_incremental, Anchors, LogDelta};
pub use features::{merge_rounds, normalize, ColumnSpec, EvidenceBatch, FeatureMatrix, RowKey, Schema, VarKind, MISSING};

#[derive(Debug, Error)]
pub enum LogError {
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("invalid binning: {0}")]
    InvalidBins(String),
    #[error("malformed feature table: {0}")]
    Parse(String),
}
