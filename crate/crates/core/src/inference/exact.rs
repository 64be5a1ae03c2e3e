use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::free_energy::neg_entropy;
use super::problem::{Belief, InferenceProblem};
use super::InferenceError;
use crate::cfg::CausalFaultGraph;

/// Largest enumerable latent space, in binary-equivalent variables.
pub const MAX_LATENT_BITS: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactPosterior {
    pub belief: Belief,
    /// −ln P(evidence).
    pub neg_log_evidence: f64,
    /// Latent variables in enumeration order (first most significant).
    pub latents: Vec<usize>,
    /// Normalised posterior over latent configurations.
    pub joint: Vec<f64>,
}

fn joint_states(problem: &InferenceProblem<'_>) -> Result<(Vec<usize>, Vec<usize>), InferenceError> {
    let bits = problem.latent_bits();
    if bits > MAX_LATENT_BITS + 1e-9 {
        return Err(InferenceError::TooLarge { bits });
    }
    let latents = problem.latent().to_vec();
    let arities = latents.iter().map(|&v| problem.graph.arity(v)).collect();
    Ok((latents, arities))
}

/// Calls `f(config_index, states)` for every latent configuration.
fn for_each_config(problem: &InferenceProblem<'_>, latents: &[usize], arities: &[usize], mut f: impl FnMut(usize, &[u8])) {
    let mut states: Vec<u8> = problem.evidence().iter().map(|e| e.unwrap_or(0)).collect();
    let total: usize = arities.iter().product();
    for idx in 0..total {
        let mut rem = idx;
        for (pos, &v) in latents.iter().enumerate().rev() {
            states[v] = (rem % arities[pos]) as u8;
            rem /= arities[pos];
        }
        f(idx, &states);
    }
}

fn log_joint(g: &CausalFaultGraph, states: &[u8]) -> f64 {
    (0..g.len()).map(|v| g.prob(v, states).ln()).sum()
}

/// Brute-force posterior by enumerating every latent configuration.
pub fn exact_posterior(problem: &InferenceProblem<'_>) -> Result<ExactPosterior, InferenceError> {
    let (latents, arities) = joint_states(problem)?;
    let g = problem.graph;
    let total: usize = arities.iter().product();
    let mut logs = vec![0.0; total];
    for_each_config(problem, &latents, &arities, |i, s| logs[i] = log_joint(g, s));
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(InferenceError::ModelMisfit("evidence".into()));
    }
    let mut joint: Vec<f64> = logs.iter().map(|&l| (l - max).exp()).collect();
    let z: f64 = joint.iter().sum();
    joint.iter_mut().for_each(|p| *p /= z);
    let neg_log_evidence = -(max + z.ln());
    let mut marginals: BTreeMap<usize, Vec<f64>> = latents.iter().map(|&v| (v, vec![0.0; g.arity(v)])).collect();
    for_each_config(problem, &latents, &arities, |i, s| {
        for &v in &latents {
            marginals.get_mut(&v).expect("latent")[s[v] as usize] += joint[i];
        }
    });
    for m in marginals.values_mut() {
        let s: f64 = m.iter().sum();
        m.iter_mut().for_each(|p| *p /= s);
    }
    Ok(ExactPosterior {
        belief: Belief {
            marginals,
            free_energy: neg_log_evidence,
            sweeps: 0,
            converged: true,
            trace: Vec::new(),
        },
        neg_log_evidence,
        latents,
        joint,
    })
}

/// Free energy E_q[ln q − ln P(f, x)] of an arbitrary joint belief `q` over
/// latent configurations, laid out as in [`ExactPosterior::joint`].
pub fn joint_free_energy(problem: &InferenceProblem<'_>, q: &[f64]) -> Result<f64, InferenceError> {
    let (latents, arities) = joint_states(problem)?;
    let total: usize = arities.iter().product();
    if q.len() != total {
        return Err(InferenceError::InvalidOption(format!("joint has {} cells, expected {total}", q.len())));
    }
    let g = problem.graph;
    let mut energy = 0.0;
    let mut misfit = false;
    for_each_config(problem, &latents, &arities, |i, s| {
        if q[i] > 0.0 {
            let l = log_joint(g, s);
            if l == f64::NEG_INFINITY {
                misfit = true;
            }
            energy += q[i] * l;
        }
    });
    if misfit {
        return Err(InferenceError::ModelMisfit("joint belief".into()));
    }
    Ok(neg_entropy(q) - energy)
}

/// P(f | ℳ(f)) ∝ P(f | Pa(f)) · Π_c P(c | Pa(c)), from a blanket assignment.
///
/// Only blanket entries of `assignment` are read.
pub fn blanket_posterior(
    graph: &CausalFaultGraph,
    f: usize,
    assignment: &BTreeMap<usize, u8>,
) -> Result<Vec<f64>, InferenceError> {
    let mb = graph
        .markov_blanket(f)
        .map_err(|_| InferenceError::UnknownVariable(format!("index {f}")))?;
    let missing: Vec<String> = mb
        .iter()
        .filter(|u| !assignment.contains_key(u))
        .map(|&u| graph.variables[u].id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(InferenceError::IncompleteBlanket(missing));
    }
    let mut states = vec![0u8; graph.len()];
    for &u in &mb {
        states[u] = assignment[&u];
    }
    let children = graph.children(f);
    let r = graph.arity(f);
    let mut w = Vec::with_capacity(r);
    for k in 0..r {
        states[f] = k as u8;
        let mut p = graph.prob(f, &states);
        for &c in &children {
            p *= graph.prob(c, &states);
        }
        w.push(p);
    }
    let z: f64 = w.iter().sum();
    if !(z > 0.0) {
        return Err(InferenceError::ModelMisfit(graph.variables[f].id.clone()));
    }
    Ok(w.into_iter().map(|p| p / z).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfg::{Cpt, Dag, Variable};
    use crate::inference::free_energy::tests::single_fault;
    use crate::logs::VarKind;

    fn chain() -> CausalFaultGraph {
        let vars: Vec<Variable> = ["a", "b", "c"]
            .iter()
            .map(|id| Variable { id: id.to_string(), kind: VarKind::Fault, arity: 2 })
            .collect();
        let dag = Dag::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let cpts = vec![
            Cpt { arity: 2, parent_arities: vec![], rows: vec![vec![0.7, 0.3]] },
            Cpt { arity: 2, parent_arities: vec![2], rows: vec![vec![0.9, 0.1], vec![0.25, 0.75]] },
            Cpt { arity: 2, parent_arities: vec![2], rows: vec![vec![0.8, 0.2], vec![0.35, 0.65]] },
        ];
        CausalFaultGraph::new(vars, dag, cpts, 0).unwrap()
    }

    #[test]
    fn single_fault_posterior() {
        let g = single_fault();
        let p = InferenceProblem::new(&g, &[(1usize, 1u8)].into()).unwrap();
        let ex = exact_posterior(&p).unwrap();
        assert!((ex.belief.active(0).unwrap() - 9.0 / 13.0).abs() < 1e-15);
        assert!((ex.neg_log_evidence + (0.26f64).ln()).abs() < 1e-12);
        assert!((joint_free_energy(&p, &ex.joint).unwrap() - ex.neg_log_evidence).abs() < 1e-12);
    }

    #[test]
    fn no_evidence_gives_ancestral_priors() {
        let g = chain();
        let p = InferenceProblem::new(&g, &BTreeMap::new()).unwrap();
        let ex = exact_posterior(&p).unwrap();
        let pb = 0.7 * 0.1 + 0.3 * 0.75;
        let pc = (1.0 - pb) * 0.2 + pb * 0.65;
        assert!((ex.belief.active(0).unwrap() - 0.3).abs() < 1e-12);
        assert!((ex.belief.active(1).unwrap() - pb).abs() < 1e-12);
        assert!((ex.belief.active(2).unwrap() - pc).abs() < 1e-12);
        assert!(ex.neg_log_evidence.abs() < 1e-12);
    }

    #[test]
    fn too_many_latents_is_a_size_error() {
        let n = 21;
        let vars: Vec<Variable> = (0..n).map(|i| Variable { id: format!("f{i}"), kind: VarKind::Fault, arity: 2 }).collect();
        let cpts = (0..n).map(|_| Cpt::uniform(2, vec![])).collect();
        let g = CausalFaultGraph::new(vars, Dag::empty(n), cpts, 0).unwrap();
        let p = InferenceProblem::new(&g, &BTreeMap::new()).unwrap();
        assert!(matches!(exact_posterior(&p), Err(InferenceError::TooLarge { .. })));
    }

    #[test]
    fn blanket_posterior_matches_enumeration_on_a_chain() {
        let g = chain();
        let assignment: BTreeMap<usize, u8> = [(0, 1), (2, 1)].into();
        let bp = blanket_posterior(&g, 1, &assignment).unwrap();
        let p = InferenceProblem::new(&g, &assignment).unwrap();
        let ex = exact_posterior(&p).unwrap();
        assert!((bp[1] - ex.belief.active(1).unwrap()).abs() < 1e-15);
        assert!(matches!(
            blanket_posterior(&g, 1, &[(0, 1)].into()),
            Err(InferenceError::IncompleteBlanket(_))
        ));
    }

    #[test]
    fn no_blanket_returns_prior() {
        let vars = vec![Variable { id: "f".into(), kind: VarKind::Fault, arity: 2 }];
        let cpts = vec![Cpt { arity: 2, parent_arities: vec![], rows: vec![vec![0.85, 0.15]] }];
        let g = CausalFaultGraph::new(vars, Dag::empty(1), cpts, 0).unwrap();
        assert_eq!(blanket_posterior(&g, 0, &BTreeMap::new()).unwrap(), vec![0.85, 0.15]);
    }
}
