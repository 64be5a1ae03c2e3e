//! Hidden ground-truth causal net that generates faults and telemetry.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TruthKind {
    Fault,
    Hw,
    Sw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthVariable {
    pub name: String,
    pub kind: TruthKind,
    pub arity: usize,
    pub parents: Vec<usize>,
    /// Rows indexed by parent configuration, first parent most significant.
    pub cpt: Vec<Vec<f64>>,
    /// Per-state value range `[lo, hi]` for metric variables (`lo == hi` is an atom).
    pub emission: Vec<(f64, f64)>,
    pub higher_is_worse: bool,
    /// Stays active once sampled, until an action or scripted repair clears it.
    pub persistent: bool,
    /// Metric only reported by nodes with compute capacity.
    pub compute_only: bool,
}

impl TruthVariable {
    pub fn is_fault(&self) -> bool {
        self.kind == TruthKind::Fault
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthNet {
    vars: Vec<TruthVariable>,
    order: Vec<usize>,
}

fn check(cond: bool, field: impl Into<String>, message: impl Into<String>) -> Result<(), SimError> {
    if cond {
        Ok(())
    } else {
        Err(SimError::Config {
            field: field.into(),
            message: message.into(),
        })
    }
}

impl GroundTruthNet {
    pub fn new(mut vars: Vec<TruthVariable>) -> Result<Self, SimError> {
        let mut seen = BTreeSet::new();
        for (i, v) in vars.iter().enumerate() {
            let field = format!("truth.variables[{i}]");
            check(seen.insert(v.name.clone()), &field, format!("duplicate variable '{}'", v.name))?;
            check(v.arity >= 1, &field, "arity must be at least 1")?;
            if v.is_fault() {
                check(v.arity == 2, &field, "fault variables are binary")?;
            } else {
                check(
                    v.emission.len() == v.arity,
                    format!("{field}.emission"),
                    "one value range per state required",
                )?;
                for (lo, hi) in &v.emission {
                    check(lo <= hi, format!("{field}.emission"), "range lo must not exceed hi")?;
                }
            }
            for &p in &v.parents {
                check(p < vars.len() && p != i, format!("{field}.parents"), "invalid parent")?;
            }
        }
        let configs: Vec<usize> = vars
            .iter()
            .map(|v| v.parents.iter().map(|&p| vars[p].arity).product())
            .collect();
        for (i, v) in vars.iter_mut().enumerate() {
            let field = format!("truth.variables[{i}].cpt");
            check(
                v.cpt.len() == configs[i],
                &field,
                format!("expected {} rows, found {}", configs[i], v.cpt.len()),
            )?;
            for row in &mut v.cpt {
                check(row.len() == v.arity, &field, "row length must equal arity")?;
                check(row.iter().all(|p| (0.0..=1.0).contains(p)), &field, "probabilities must lie in [0,1]")?;
                let s: f64 = row.iter().sum();
                check((s - 1.0).abs() <= 1e-9, &field, format!("row sums to {s}, not 1"))?;
                row.iter_mut().for_each(|p| *p /= s);
            }
        }
        let order = topological_order(&vars).ok_or_else(|| SimError::Config {
            field: "truth.variables".into(),
            message: "parent relation is cyclic".into(),
        })?;
        Ok(GroundTruthNet { vars, order })
    }

    pub fn variables(&self) -> &[TruthVariable] {
        &self.vars
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    pub fn parent_config(&self, v: usize, states: &[u8]) -> usize {
        self.vars[v]
            .parents
            .iter()
            .fold(0, |acc, &p| acc * self.vars[p].arity + states[p] as usize)
    }

    pub fn row(&self, v: usize, states: &[u8]) -> &[f64] {
        &self.vars[v].cpt[self.parent_config(v, states)]
    }

    /// Replace the rows of root variables with `[1-h, h/(r-1), ...]`.
    pub fn with_hazards(&self, hazards: &BTreeMap<String, f64>) -> Result<Self, SimError> {
        let mut net = self.clone();
        for (name, &h) in hazards {
            let field = format!("hazards.{name}");
            let v = net.index_of(name).ok_or_else(|| SimError::Config {
                field: field.clone(),
                message: "unknown truth variable".into(),
            })?;
            check((0.0..=1.0).contains(&h), &field, "hazard must lie in [0,1]")?;
            let var = &mut net.vars[v];
            check(var.parents.is_empty(), &field, "hazards apply to root variables only")?;
            check(var.arity >= 2, &field, "single-state variable has no hazard")?;
            let rest = h / (var.arity - 1) as f64;
            let mut row = vec![rest; var.arity];
            row[0] = 1.0 - h;
            var.cpt = vec![row];
        }
        Ok(net)
    }

    /// Ancestral sample of one (node, round).
    ///
    /// Exactly one uniform draw is consumed per variable, clamped or not, so
    /// paired runs whose clamps differ stay on aligned random streams.
    /// `hazards` are node-level extra hazards, combined noisy-OR with the
    /// table probability of the worst state.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        clamp: &BTreeMap<usize, u8>,
        hazards: &BTreeMap<usize, f64>,
    ) -> Vec<u8> {
        let mut states = vec![0u8; self.vars.len()];
        for &v in &self.order {
            let u: f64 = rng.gen();
            if let Some(&s) = clamp.get(&v) {
                states[v] = s;
                continue;
            }
            let row = self.row(v, &states);
            let state = match hazards.get(&v) {
                Some(&h) if h > 0.0 => {
                    let mut adjusted = row.to_vec();
                    let last = adjusted.len() - 1;
                    let moved: f64 = adjusted[..last].iter().map(|p| p * h).sum();
                    adjusted[..last].iter_mut().for_each(|p| *p *= 1.0 - h);
                    adjusted[last] += moved;
                    categorical(&adjusted, u)
                }
                _ => categorical(row, u),
            };
            states[v] = state as u8;
        }
        states
    }

    /// Value reported for a metric variable in `state`, given a uniform draw.
    pub fn emit_value(&self, v: usize, state: u8, u: f64) -> f64 {
        let (lo, hi) = self.vars[v].emission[state as usize];
        lo + u * (hi - lo)
    }

    /// Undirected skeleton as sorted name pairs.
    pub fn skeleton(&self) -> BTreeSet<(String, String)> {
        let mut out = BTreeSet::new();
        for v in &self.vars {
            for &p in &v.parents {
                let a = self.vars[p].name.clone();
                let b = v.name.clone();
                out.insert(if a < b { (a, b) } else { (b, a) });
            }
        }
        out
    }
}

fn categorical(row: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1)
}

fn topological_order(vars: &[TruthVariable]) -> Option<Vec<usize>> {
    let n = vars.len();
    let mut indegree: Vec<usize> = vars.iter().map(|v| v.parents.len()).collect();
    let mut children = vec![Vec::new(); n];
    for (i, v) in vars.iter().enumerate() {
        for &p in &v.parents {
            children[p].push(i);
        }
    }
    let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(v) = ready.pop_first() {
        order.push(v);
        for &c in &children[v] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.insert(c);
            }
        }
    }
    (order.len() == n).then_some(order)
}
