use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::free_energy::{expected_log_family, free_energy_dense};
use super::problem::{Belief, InferenceProblem};
use super::InferenceError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldOptions {
    pub tol: f64,
    pub max_sweeps: usize,
    /// Record the variables read by each single-variable update.
    pub record_reads: bool,
}

impl Default for MeanFieldOptions {
    fn default() -> Self {
        MeanFieldOptions {
            tol: 1e-6,
            max_sweeps: 100,
            record_reads: false,
        }
    }
}

/// Deterministic work counters for one run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InferenceStats {
    /// Families evaluated, per sweep.
    pub family_reads: Vec<u64>,
    /// Table cells evaluated, per sweep.
    pub cpt_evals: Vec<u64>,
    /// (updated variable, variables whose state or marginal was read).
    pub reads: Vec<(usize, BTreeSet<usize>)>,
}

impl InferenceStats {
    pub fn total_cpt_evals(&self) -> u64 {
        self.cpt_evals.iter().sum()
    }
}

/// Variables whose current marginal is held fixed during a pass.
pub(crate) type Frozen = BTreeSet<usize>;

pub(crate) struct Updater<'p, 'g> {
    pub problem: &'p InferenceProblem<'g>,
    pub q: Vec<Vec<f64>>,
    pub stats: InferenceStats,
    pub record_reads: bool,
}

impl Updater<'_, '_> {
    /// Exact coordinate minimiser of F in `v`, reading only v's blanket.
    pub fn update(&mut self, v: usize) -> Result<f64, InferenceError> {
        let g = self.problem.graph;
        let r = g.arity(v);
        let families: Vec<usize> = std::iter::once(v).chain(self.problem.children(v).iter().copied()).collect();
        let mut logits = vec![0.0; r];
        let mut fam_reads = 0u64;
        let mut evals = 0u64;
        for (k, logit) in logits.iter_mut().enumerate() {
            for &f in &families {
                let (e, n) = expected_log_family(g, f, &self.q, Some((v, k)));
                *logit += e;
                evals += n;
            }
        }
        fam_reads += families.len() as u64;
        if let Some(last) = self.stats.family_reads.last_mut() {
            *last += fam_reads;
        }
        if let Some(last) = self.stats.cpt_evals.last_mut() {
            *last += evals;
        }
        if self.record_reads {
            let mut read = BTreeSet::new();
            for &f in &families {
                read.insert(f);
                read.extend(g.parents(f).iter().copied());
            }
            read.remove(&v);
            self.stats.reads.push((v, read));
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(InferenceError::ModelMisfit(g.variables[v].id.clone()));
        }
        let mut next: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
        let z: f64 = next.iter().sum();
        next.iter_mut().for_each(|p| *p /= z);
        let change = next
            .iter()
            .zip(&self.q[v])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        self.q[v] = next;
        Ok(change)
    }

    pub fn begin_sweep(&mut self) {
        self.stats.family_reads.push(0);
        self.stats.cpt_evals.push(0);
    }

    pub fn marginals(&self) -> BTreeMap<usize, Vec<f64>> {
        self.problem.latent().iter().map(|&v| (v, self.q[v].clone())).collect()
    }
}

pub(crate) fn latent_order(problem: &InferenceProblem<'_>, frozen: &Frozen) -> Vec<usize> {
    problem
        .graph
        .dag
        .topological_order()
        .expect("fitted graphs are acyclic")
        .into_iter()
        .filter(|&v| problem.is_latent(v) && !frozen.contains(&v))
        .collect()
}

/// Coordinate-ascent mean field in topological order (Gauss–Seidel).
///
/// A run stops once no latent has a blanket neighbour whose marginal moved
/// by `tol` or more since that latent was last updated, so the next sweep
/// could not change anything by `tol`.
pub fn minimize_free_energy(
    problem: &InferenceProblem<'_>,
    init: Option<&Belief>,
    opts: &MeanFieldOptions,
) -> Result<(Belief, InferenceStats), InferenceError> {
    if !(opts.tol > 0.0) {
        return Err(InferenceError::InvalidOption("tol must be > 0".into()));
    }
    let start = match init {
        Some(b) => b.clone(),
        None => Belief::uniform(problem),
    };
    let q = start.dense(problem)?;
    let mut up = Updater {
        problem,
        q,
        stats: InferenceStats::default(),
        record_reads: opts.record_reads,
    };
    let frozen = Frozen::new();
    let order = latent_order(problem, &frozen);
    let g = problem.graph;
    let blankets: BTreeMap<usize, Vec<usize>> = order
        .iter()
        .map(|&v| {
            let mb = g.markov_blanket(v).expect("latent in graph");
            (v, mb.into_iter().filter(|&u| problem.is_latent(u)).collect())
        })
        .collect();
    let mut pending: BTreeMap<usize, f64> = order.iter().map(|&v| (v, f64::INFINITY)).collect();
    let mut trace = Vec::new();
    let mut converged = order.is_empty();
    let mut sweeps = 0;
    while !converged && sweeps < opts.max_sweeps {
        up.begin_sweep();
        for &v in &order {
            let change = up.update(v)?;
            pending.insert(v, 0.0);
            for &u in &blankets[&v] {
                let p = pending.get_mut(&u).expect("latent blanket member");
                *p = p.max(change);
            }
        }
        sweeps += 1;
        trace.push(free_energy_dense(problem, &up.q)?);
        converged = pending.values().all(|&p| p < opts.tol);
    }
    let free_energy = free_energy_dense(problem, &up.q)?;
    Ok((
        Belief {
            marginals: up.marginals(),
            free_energy,
            sweeps,
            converged,
            trace,
        },
        up.stats,
    ))
}
