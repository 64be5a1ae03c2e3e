use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::InferenceError;
use crate::cfg::CausalFaultGraph;
use crate::logs::{VarKind, MISSING};

/// A fitted graph with clamped evidence; every unobserved variable is latent.
#[derive(Debug, Clone)]
pub struct InferenceProblem<'g> {
    pub graph: &'g CausalFaultGraph,
    evidence: Vec<Option<u8>>,
    latent: Vec<usize>,
    children: Vec<Vec<usize>>,
}

impl<'g> InferenceProblem<'g> {
    pub fn new(graph: &'g CausalFaultGraph, evidence: &BTreeMap<usize, u8>) -> Result<Self, InferenceError> {
        let n = graph.len();
        let mut ev = vec![None; n];
        for (&v, &s) in evidence {
            if v >= n {
                return Err(InferenceError::UnknownVariable(format!("index {v}")));
            }
            if s as usize >= graph.arity(v) {
                return Err(InferenceError::InvalidEvidence {
                    variable: graph.variables[v].id.clone(),
                    value: s,
                });
            }
            ev[v] = Some(s);
        }
        Ok(Self::from_parts(graph, ev))
    }

    fn from_parts(graph: &'g CausalFaultGraph, evidence: Vec<Option<u8>>) -> Self {
        let latent = (0..graph.len()).filter(|&v| evidence[v].is_none()).collect();
        let mut children = vec![Vec::new(); graph.len()];
        for (a, b) in graph.dag.edges() {
            children[a].push(b);
        }
        InferenceProblem {
            graph,
            evidence,
            latent,
            children,
        }
    }

    /// Clamps the non-missing context cells of a feature row; fault
    /// indicators and missing cells stay latent.
    pub fn from_row(graph: &'g CausalFaultGraph, row: &[u8]) -> Result<Self, InferenceError> {
        let evidence: BTreeMap<usize, u8> = (0..graph.len())
            .filter(|&v| graph.variables[v].kind.is_context() && row[v] != MISSING)
            .map(|v| (v, row[v]))
            .collect();
        Self::new(graph, &evidence)
    }

    /// The same problem keeping only evidence on variables of `kind`.
    pub fn restricted_to(&self, kind: VarKind) -> Self {
        let ev = self
            .evidence
            .iter()
            .enumerate()
            .map(|(v, e)| e.filter(|_| self.graph.variables[v].kind == kind))
            .collect();
        Self::from_parts(self.graph, ev)
    }

    pub fn with_evidence(&self, v: usize, value: Option<u8>) -> Self {
        let mut ev = self.evidence.clone();
        ev[v] = value;
        Self::from_parts(self.graph, ev)
    }

    pub fn evidence(&self) -> &[Option<u8>] {
        &self.evidence
    }

    pub fn evidence_map(&self) -> BTreeMap<usize, u8> {
        self.evidence
            .iter()
            .enumerate()
            .filter_map(|(v, e)| e.map(|s| (v, s)))
            .collect()
    }

    pub fn latent(&self) -> &[usize] {
        &self.latent
    }

    pub fn is_latent(&self, v: usize) -> bool {
        self.evidence[v].is_none()
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    /// Σ log2(arity) over latents.
    pub fn latent_bits(&self) -> f64 {
        self.latent.iter().map(|&v| (self.graph.arity(v) as f64).log2()).sum()
    }
}

/// Factorised marginals over the latent variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Belief {
    pub marginals: BTreeMap<usize, Vec<f64>>,
    pub free_energy: f64,
    pub sweeps: usize,
    pub converged: bool,
    /// F after each sweep.
    #[serde(default)]
    pub trace: Vec<f64>,
}

impl Belief {
    pub fn uniform(problem: &InferenceProblem<'_>) -> Self {
        let marginals = problem
            .latent()
            .iter()
            .map(|&v| {
                let r = problem.graph.arity(v);
                (v, vec![1.0 / r as f64; r])
            })
            .collect();
        Belief {
            marginals,
            free_energy: f64::NAN,
            sweeps: 0,
            converged: false,
            trace: Vec::new(),
        }
    }

    pub fn from_marginals(marginals: BTreeMap<usize, Vec<f64>>) -> Self {
        Belief {
            marginals,
            free_energy: f64::NAN,
            sweeps: 0,
            converged: false,
            trace: Vec::new(),
        }
    }

    /// Q(v = last state), the active probability for binary faults.
    pub fn active(&self, v: usize) -> Option<f64> {
        self.marginals.get(&v).and_then(|m| m.last().copied())
    }

    /// Dense per-variable distributions with observed variables as point masses.
    pub(crate) fn dense(&self, problem: &InferenceProblem<'_>) -> Result<Vec<Vec<f64>>, InferenceError> {
        let g = problem.graph;
        (0..g.len())
            .map(|v| match problem.evidence()[v] {
                Some(s) => {
                    let mut m = vec![0.0; g.arity(v)];
                    m[s as usize] = 1.0;
                    Ok(m)
                }
                None => {
                    let m = self
                        .marginals
                        .get(&v)
                        .ok_or_else(|| InferenceError::MissingMarginal(g.variables[v].id.clone()))?;
                    if m.len() != g.arity(v) {
                        return Err(InferenceError::MissingMarginal(g.variables[v].id.clone()));
                    }
                    Ok(m.clone())
                }
            })
            .collect()
    }
}
