use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::CfgError;
use crate::logs::{Schema, VarKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub id: String,
    pub kind: VarKind,
    pub arity: usize,
}

impl Variable {
    pub fn from_schema(schema: &Schema) -> Vec<Variable> {
        schema
            .columns
            .iter()
            .map(|c| Variable {
                id: c.id.clone(),
                kind: c.kind,
                arity: c.arity,
            })
            .collect()
    }
}

/// Directed graph over `0..n` with sorted parent lists.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dag {
    parents: Vec<Vec<usize>>,
}

impl Dag {
    pub fn empty(n: usize) -> Self {
        Dag {
            parents: vec![Vec::new(); n],
        }
    }

    /// Builds a DAG from an edge list, rejecting cycles and bad indices.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, CfgError> {
        let mut dag = Dag::empty(n);
        for &(a, b) in edges {
            dag.add_edge(a, b)?;
        }
        Ok(dag)
    }

    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }

    pub fn parents(&self, v: usize) -> &[usize] {
        &self.parents[v]
    }

    pub fn children(&self, v: usize) -> Vec<usize> {
        (0..self.len()).filter(|&c| self.has_edge(v, c)).collect()
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.parents[to].binary_search(&from).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    /// Edges sorted by (from, to).
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = self
            .parents
            .iter()
            .enumerate()
            .flat_map(|(to, ps)| ps.iter().map(move |&from| (from, to)))
            .collect();
        out.sort_unstable();
        out
    }

    /// True if `to` is reachable from `from` along directed edges.
    pub fn reaches(&self, from: usize, to: usize) -> bool {
        if from == to {
            return true;
        }
        let n = self.len();
        let mut children = vec![Vec::new(); n];
        for (a, b) in self.edges() {
            children[a].push(b);
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([from]);
        seen[from] = true;
        while let Some(v) = queue.pop_front() {
            for &c in &children[v] {
                if c == to {
                    return true;
                }
                if !seen[c] {
                    seen[c] = true;
                    queue.push_back(c);
                }
            }
        }
        false
    }

    pub fn add_edge(&mut self, from: usize, to: usize) -> Result<(), CfgError> {
        let n = self.len();
        if from >= n || to >= n {
            return Err(CfgError::UnknownVariable(format!("index {}", from.max(to))));
        }
        if from == to || self.reaches(to, from) {
            return Err(CfgError::Cycle { from, to });
        }
        if let Err(pos) = self.parents[to].binary_search(&from) {
            self.parents[to].insert(pos, from);
        }
        Ok(())
    }

    pub fn remove_edge(&mut self, from: usize, to: usize) -> bool {
        match self.parents[to].binary_search(&from) {
            Ok(pos) => {
                self.parents[to].remove(pos);
                true
            }
            Err(_) => false,
        }
    }

    pub(crate) fn set_parents(&mut self, v: usize, parents: Vec<usize>) {
        self.parents[v] = parents;
    }

    /// Kahn order with ties broken by index; `None` if cyclic.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.len();
        let mut indegree: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut children = vec![Vec::new(); n];
        for (a, b) in self.edges() {
            children[a].push(b);
        }
        let mut ready: BTreeSet<usize> = (0..n).filter(|&v| indegree[v] == 0).collect();
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

    pub fn is_acyclic(&self) -> bool {
        self.topological_order().is_some()
    }

    pub fn max_in_degree(&self) -> usize {
        self.parents.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Directed edge-set Hamming distance.
    pub fn hamming(&self, other: &Dag) -> usize {
        self.parents
            .iter()
            .zip(&other.parents)
            .map(|(a, b)| symmetric_difference(a, b))
            .sum()
    }

    /// Pa(v) ∪ Ch(v) ∪ Pa(Ch(v)) without v.
    pub fn markov_blanket(&self, v: usize) -> Result<BTreeSet<usize>, CfgError> {
        if v >= self.len() {
            return Err(CfgError::UnknownVariable(format!("index {v}")));
        }
        let mut mb: BTreeSet<usize> = self.parents[v].iter().copied().collect();
        for c in self.children(v) {
            mb.insert(c);
            mb.extend(self.parents[c].iter().copied());
        }
        mb.remove(&v);
        Ok(mb)
    }
}

/// Size of the symmetric difference of two sorted slices.
pub(crate) fn symmetric_difference(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut d) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
            std::cmp::Ordering::Less => {
                d += 1;
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                d += 1;
                j += 1;
            }
        }
    }
    d + (a.len() - i) + (b.len() - j)
}

/// Conditional table for one variable; rows indexed by parent configuration
/// with the first parent most significant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cpt {
    pub arity: usize,
    pub parent_arities: Vec<usize>,
    pub rows: Vec<Vec<f64>>,
}

impl Cpt {
    pub fn uniform(arity: usize, parent_arities: Vec<usize>) -> Self {
        let q: usize = parent_arities.iter().product();
        Cpt {
            arity,
            parent_arities,
            rows: vec![vec![1.0 / arity as f64; arity]; q],
        }
    }

    pub fn n_configs(&self) -> usize {
        self.rows.len()
    }

    pub fn config_of(&self, parent_states: impl IntoIterator<Item = u8>) -> usize {
        parent_states
            .into_iter()
            .zip(&self.parent_arities)
            .fold(0, |acc, (s, &r)| acc * r + s as usize)
    }

    /// Parent states of configuration `j`.
    pub fn states_of(&self, mut j: usize) -> Vec<u8> {
        let mut out = vec![0u8; self.parent_arities.len()];
        for (k, &r) in self.parent_arities.iter().enumerate().rev() {
            out[k] = (j % r) as u8;
            j /= r;
        }
        out
    }
}

/// Learned DAG with per-variable CPTs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalFaultGraph {
    pub variables: Vec<Variable>,
    pub dag: Dag,
    pub cpts: Vec<Cpt>,
    pub round: u64,
}

impl CausalFaultGraph {
    pub fn new(variables: Vec<Variable>, dag: Dag, cpts: Vec<Cpt>, round: u64) -> Result<Self, CfgError> {
        if variables.len() != dag.len() || cpts.len() != dag.len() {
            return Err(CfgError::VariableMismatch(format!(
                "{} variables, {} graph nodes, {} tables",
                variables.len(),
                dag.len(),
                cpts.len()
            )));
        }
        if !dag.is_acyclic() {
            return Err(CfgError::Cyclic);
        }
        for (v, cpt) in cpts.iter().enumerate() {
            let expected: Vec<usize> = dag.parents(v).iter().map(|&p| variables[p].arity).collect();
            if cpt.arity != variables[v].arity || cpt.parent_arities != expected {
                return Err(CfgError::VariableMismatch(format!("table shape for `{}`", variables[v].id)));
            }
            let q: usize = expected.iter().product();
            if cpt.rows.len() != q || cpt.rows.iter().any(|r| r.len() != cpt.arity) {
                return Err(CfgError::VariableMismatch(format!("table size for `{}`", variables[v].id)));
            }
            for row in &cpt.rows {
                let s: f64 = row.iter().sum();
                if (s - 1.0).abs() > 1e-9 || row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                    return Err(CfgError::InvalidTable(variables[v].id.clone()));
                }
            }
        }
        Ok(CausalFaultGraph {
            variables,
            dag,
            cpts,
            round,
        })
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.id == id)
    }

    pub fn arity(&self, v: usize) -> usize {
        self.variables[v].arity
    }

    pub fn parents(&self, v: usize) -> &[usize] {
        self.dag.parents(v)
    }

    pub fn children(&self, v: usize) -> Vec<usize> {
        self.dag.children(v)
    }

    pub fn markov_blanket(&self, v: usize) -> Result<BTreeSet<usize>, CfgError> {
        self.dag.markov_blanket(v)
    }

    /// Row index of `v` under a full assignment.
    pub fn config(&self, v: usize, states: &[u8]) -> usize {
        self.cpts[v].config_of(self.dag.parents(v).iter().map(|&p| states[p]))
    }

    /// P(v = states[v] | parents) under a full assignment.
    pub fn prob(&self, v: usize, states: &[u8]) -> f64 {
        self.cpts[v].rows[self.config(v, states)][states[v] as usize]
    }

    pub fn vars_of_kind(&self, kind: VarKind) -> Vec<usize> {
        (0..self.len()).filter(|&v| self.variables[v].kind == kind).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_cycles() {
        let mut d = Dag::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        assert!(matches!(d.add_edge(2, 0), Err(CfgError::Cycle { .. })));
        assert!(d.add_edge(1, 1).is_err());
        assert_eq!(d.edges(), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn blanket_examples() {
        let chain = Dag::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(chain.markov_blanket(1).unwrap(), [0, 2].into());
        let collider = Dag::from_edges(3, &[(0, 2), (1, 2)]).unwrap();
        assert_eq!(collider.markov_blanket(0).unwrap(), [1, 2].into());
        let lone = Dag::empty(2);
        assert!(lone.markov_blanket(1).unwrap().is_empty());
        assert!(lone.markov_blanket(5).is_err());
    }

    #[test]
    fn hamming_counts_directed_edges() {
        let a = Dag::from_edges(3, &[(0, 1)]).unwrap();
        let b = Dag::from_edges(3, &[(1, 0), (1, 2)]).unwrap();
        assert_eq!(a.hamming(&b), 3);
        assert_eq!(a.hamming(&a), 0);
    }

    #[test]
    fn configs_roundtrip() {
        let cpt = Cpt::uniform(2, vec![3, 2, 2]);
        for j in 0..cpt.n_configs() {
            assert_eq!(cpt.config_of(cpt.states_of(j)), j);
        }
    }
}
