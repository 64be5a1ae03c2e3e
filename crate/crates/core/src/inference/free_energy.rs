use super::problem::{Belief, InferenceProblem};
use super::InferenceError;
use crate::cfg::CausalFaultGraph;

/// E[ln P(v | Pa(v))] under independent member distributions `q`, with
/// `fixed` optionally pinning one member. Returns the number of table cells
/// evaluated alongside the value; −∞ when a weighted cell is zero.
pub(crate) fn expected_log_family(
    g: &CausalFaultGraph,
    v: usize,
    q: &[Vec<f64>],
    fixed: Option<(usize, usize)>,
) -> (f64, u64) {
    let parents = g.parents(v);
    let members: Vec<usize> = std::iter::once(v).chain(parents.iter().copied()).collect();
    // Support of each member: (state, weight) with weight > 0.
    let support: Vec<Vec<(usize, f64)>> = members
        .iter()
        .map(|&m| match fixed {
            Some((i, k)) if i == m => vec![(k, 1.0)],
            _ => q[m].iter().enumerate().filter(|(_, &w)| w > 0.0).map(|(s, &w)| (s, w)).collect(),
        })
        .collect();
    if support.iter().any(Vec::is_empty) {
        return (0.0, 0);
    }
    let cpt = &g.cpts[v];
    let mut idx = vec![0usize; members.len()];
    let mut total = 0.0;
    let mut evals = 0u64;
    loop {
        let mut w = 1.0;
        let mut config = 0usize;
        for (pos, choices) in support.iter().enumerate().skip(1) {
            let (s, wt) = choices[idx[pos]];
            w *= wt;
            config = config * cpt.parent_arities[pos - 1] + s;
        }
        let (s, wt) = support[0][idx[0]];
        w *= wt;
        let p = cpt.rows[config][s];
        evals += 1;
        if w > 0.0 {
            if p <= 0.0 {
                return (f64::NEG_INFINITY, evals);
            }
            total += w * p.ln();
        }
        // Odometer over member supports.
        let mut pos = members.len();
        loop {
            if pos == 0 {
                return (total, evals);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < support[pos].len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

pub(crate) fn neg_entropy(m: &[f64]) -> f64 {
    m.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum()
}

/// Variational free energy of a factorised belief:
/// Σ_i E[ln q_i] − Σ_families E_Q[ln P(v | Pa(v))].
pub fn free_energy(problem: &InferenceProblem<'_>, belief: &Belief) -> Result<f64, InferenceError> {
    let q = belief.dense(problem)?;
    free_energy_dense(problem, &q)
}

pub(crate) fn free_energy_dense(problem: &InferenceProblem<'_>, q: &[Vec<f64>]) -> Result<f64, InferenceError> {
    let g = problem.graph;
    let neg_h: f64 = problem.latent().iter().map(|&v| neg_entropy(&q[v])).sum();
    let mut energy = 0.0;
    for v in 0..g.len() {
        let (e, _) = expected_log_family(g, v, q, None);
        if e == f64::NEG_INFINITY {
            return Err(InferenceError::ModelMisfit(g.variables[v].id.clone()));
        }
        energy += e;
    }
    Ok(neg_h - energy)
}
