use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{BinSpec, LogDelta, LogError};
use crate::sim::NodeId;

/// Missing-value token in discrete data.
pub const MISSING: u8 = u8::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VarKind {
    #[serde(rename = "fault-indicator")]
    Fault,
    #[serde(rename = "hw-context")]
    HwContext,
    #[serde(rename = "sw-context")]
    SwContext,
}

impl VarKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VarKind::Fault => "fault-indicator",
            VarKind::HwContext => "hw-context",
            VarKind::SwContext => "sw-context",
        }
    }

    pub fn is_context(self) -> bool {
        self != VarKind::Fault
    }

    pub fn parse(s: &str) -> Option<Self> {
        [VarKind::Fault, VarKind::HwContext, VarKind::SwContext]
            .into_iter()
            .find(|k| k.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub id: String,
    pub kind: VarKind,
    pub arity: usize,
    #[serde(default)]
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<ColumnSpec>,
}

impl Schema {
    /// Fault vocabulary first, then metric columns sorted by name.
    pub fn from_bins(bins: &BinSpec) -> Self {
        let mut columns: Vec<ColumnSpec> = bins
            .faults
            .iter()
            .map(|f| ColumnSpec {
                id: f.clone(),
                kind: VarKind::Fault,
                arity: 2,
                degenerate: false,
            })
            .collect();
        columns.extend(bins.metrics.iter().map(|m| ColumnSpec {
            id: m.name.clone(),
            kind: m.kind,
            arity: m.arity(),
            degenerate: m.degenerate,
        }));
        Schema { columns }
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RowKey {
    pub node: NodeId,
    pub round: u64,
}

/// Discrete observation matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub schema: Schema,
    pub round: u64,
    pub keys: Vec<RowKey>,
    pub data: Vec<u8>,
}

impl FeatureMatrix {
    pub fn empty(schema: Schema, round: u64) -> Self {
        FeatureMatrix {
            schema,
            round,
            keys: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn from_rows(schema: Schema, round: u64, rows: Vec<(RowKey, Vec<u8>)>) -> Result<Self, LogError> {
        let mut m = FeatureMatrix::empty(schema, round);
        for (key, row) in rows {
            m.push_row(key, &row)?;
        }
        Ok(m)
    }

    pub fn push_row(&mut self, key: RowKey, row: &[u8]) -> Result<(), LogError> {
        if row.len() != self.schema.len() {
            return Err(LogError::SchemaMismatch(format!(
                "row has {} values, schema has {} columns",
                row.len(),
                self.schema.len()
            )));
        }
        for (c, &v) in self.schema.columns.iter().zip(row) {
            if v != MISSING && v as usize >= c.arity {
                return Err(LogError::SchemaMismatch(format!("value {v} out of range for `{}`", c.id)));
            }
        }
        self.keys.push(key);
        self.data.extend_from_slice(row);
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.keys.len()
    }

    pub fn n_cols(&self) -> usize {
        self.schema.len()
    }

    pub fn row(&self, r: usize) -> &[u8] {
        let w = self.n_cols();
        &self.data[r * w..(r + 1) * w]
    }

    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.data[r * self.n_cols() + c]
    }

    /// Tab-separated export: a schema header `id:kind:arity` per column,
    /// then `node round values...` with `NA` for missing.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("node\tround");
        for c in &self.schema.columns {
            let _ = write!(out, "\t{}:{}:{}", c.id, c.kind.as_str(), c.arity);
        }
        out.push('\n');
        for (r, key) in self.keys.iter().enumerate() {
            let _ = write!(out, "{}\t{}", key.node, key.round);
            for &v in self.row(r) {
                if v == MISSING {
                    out.push_str("\tNA");
                } else {
                    let _ = write!(out, "\t{v}");
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn from_tsv(text: &str, round: u64) -> Result<Self, LogError> {
        let bad = |m: &str| LogError::Parse(m.to_string());
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("missing header"))?;
        let mut columns = Vec::new();
        for field in header.split('\t').skip(2) {
            let mut parts = field.rsplitn(3, ':');
            let arity = parts.next().and_then(|a| a.parse().ok()).ok_or_else(|| bad(field))?;
            let kind = parts.next().and_then(VarKind::parse).ok_or_else(|| bad(field))?;
            let id = parts.next().ok_or_else(|| bad(field))?.to_string();
            columns.push(ColumnSpec {
                id,
                kind,
                arity,
                degenerate: arity == 1,
            });
        }
        let mut m = FeatureMatrix::empty(Schema { columns }, round);
        for line in lines.filter(|l| !l.is_empty()) {
            let mut fields = line.split('\t');
            let node = fields.next().ok_or_else(|| bad(line))?;
            let r = fields.next().and_then(|r| r.parse().ok()).ok_or_else(|| bad(line))?;
            let row = fields
                .map(|f| if f == "NA" { Ok(MISSING) } else { f.parse().map_err(|_| bad(f)) })
                .collect::<Result<Vec<u8>, _>>()?;
            m.push_row(RowKey { node: node.into(), round: r }, &row)?;
        }
        Ok(m)
    }
}

/// One row per (node, entry round) in the delta.
///
/// Metric cells hold the bin of the interval mean, or [`MISSING`] when the
/// node reported no value. A fault cell is active iff a matching event
/// occurred; unrecognised event types land in the `other` column.
pub fn normalize(delta: &LogDelta, bins: &BinSpec) -> FeatureMatrix {
    let schema = Schema::from_bins(bins);
    let mut groups: BTreeMap<RowKey, (BTreeMap<&str, (f64, usize)>, Vec<bool>)> = BTreeMap::new();
    for e in delta.iter() {
        let key = RowKey {
            node: e.node.clone(),
            round: e.round,
        };
        let (sums, faults) = groups
            .entry(key)
            .or_insert_with(|| (BTreeMap::new(), vec![false; bins.faults.len()]));
        for (name, &v) in &e.metrics {
            if v.is_finite() {
                let s = sums.entry(name.as_str()).or_insert((0.0, 0));
                s.0 += v;
                s.1 += 1;
            }
        }
        if let Some(col) = e.event.fault_column() {
            if col == "other" {
                log::warn!("unrecognised event type `{}` from {}", e.event, e.node);
            }
            if let Some(i) = bins.faults.iter().position(|f| f == col) {
                faults[i] = true;
            }
        }
    }
    let mut m = FeatureMatrix::empty(schema, delta.round);
    for (key, (sums, faults)) in groups {
        let mut row: Vec<u8> = faults.iter().map(|&a| a as u8).collect();
        for metric in &bins.metrics {
            row.push(match sums.get(metric.name.as_str()) {
                Some(&(s, n)) => metric.bin(s / n as f64),
                None => MISSING,
            });
        }
        m.keys.push(key);
        m.data.extend(row);
    }
    m
}

/// Accumulated evidence over a sliding window of rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceBatch {
    pub matrix: FeatureMatrix,
}

impl EvidenceBatch {
    pub fn new(schema: Schema) -> Self {
        EvidenceBatch {
            matrix: FeatureMatrix::empty(schema, 0),
        }
    }

    pub fn schema(&self) -> &Schema {
        &self.matrix.schema
    }

    pub fn n_rows(&self) -> usize {
        self.matrix.n_rows()
    }

    pub fn row(&self, r: usize) -> &[u8] {
        self.matrix.row(r)
    }
}

impl From<FeatureMatrix> for EvidenceBatch {
    fn from(matrix: FeatureMatrix) -> Self {
        EvidenceBatch { matrix }
    }
}

/// Appends `new` and keeps rows from the most recent `window` rounds
/// (`None` keeps everything).
pub fn merge_rounds(history: EvidenceBatch, new: &FeatureMatrix, window: Option<u64>) -> Result<EvidenceBatch, LogError> {
    if history.matrix.schema != new.schema {
        return Err(LogError::SchemaMismatch("evidence schema is frozen after bootstrap".into()));
    }
    let mut m = history.matrix;
    m.keys.extend(new.keys.iter().cloned());
    m.data.extend_from_slice(&new.data);
    m.round = m.round.max(new.round);
    if let Some(w) = window {
        let newest = m.keys.iter().map(|k| k.round).max().unwrap_or(0);
        let cutoff = newest.saturating_sub(w);
        let width = m.n_cols();
        let keep: Vec<usize> = (0..m.n_rows()).filter(|&r| m.keys[r].round > cutoff).collect();
        let keys = keep.iter().map(|&r| m.keys[r].clone()).collect();
        let data = keep.iter().flat_map(|&r| m.data[r * width..(r + 1) * width].iter().copied()).collect();
        m.keys = keys;
        m.data = data;
    }
    Ok(EvidenceBatch { matrix: m })
}
