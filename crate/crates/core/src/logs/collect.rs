use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::sim::{ContinuumState, EventType, LogEntry, NodeId};

/// Per-node timestamp of the last collected entry.
pub type Anchors = BTreeMap<NodeId, u64>;

/// Entries newer than each node's anchor, labelled with the collection round.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LogDelta {
    pub round: u64,
    pub entries: BTreeMap<NodeId, Vec<LogEntry>>,
}

impl LogDelta {
    pub fn len(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &LogEntry> {
        self.entries.values().flatten()
    }

    /// Moves each anchor to the newest collected timestamp.
    pub fn advance(&self, anchors: &mut Anchors) {
        for (node, entries) in &self.entries {
            if let Some(last) = entries.last() {
                let a = anchors.entry(node.clone()).or_insert(0);
                *a = (*a).max(last.ts);
            }
        }
    }
}

/// Pure read of everything after the anchors from raw per-node streams.
///
/// Entries repeating an already-seen `(ts, event)` for the same node are
/// dropped. Nodes without an anchor are read from the start.
pub fn collect_from<'a, I>(streams: I, anchors: &Anchors, round: u64) -> LogDelta
where
    I: IntoIterator<Item = (&'a NodeId, &'a [LogEntry])>,
{
    let mut entries = BTreeMap::new();
    for (node, stream) in streams {
        let anchor = anchors.get(node).copied().unwrap_or(0);
        let mut seen: BTreeSet<(u64, EventType)> = BTreeSet::new();
        let mut fresh: Vec<LogEntry> = stream
            .iter()
            .filter(|e| e.ts > anchor)
            .filter(|e| seen.insert((e.ts, e.event.clone())))
            .cloned()
            .collect();
        fresh.sort_by_key(|e| e.ts);
        entries.insert(node.clone(), fresh);
    }
    LogDelta { round, entries }
}

/// Collects from a live continuum. Isolated nodes contribute an empty sub-delta.
pub fn collect_incremental(state: &ContinuumState, anchors: &Anchors, round: u64) -> LogDelta {
    let streams = state.nodes.iter().map(|(id, node)| {
        let stream: &[LogEntry] = if node.is_isolated() { &[] } else { state.node_logs(id) };
        (id, stream)
    });
    collect_from(streams, anchors, round)
}
