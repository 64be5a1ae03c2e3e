//! Random graph generators and brute-force oracles shared by integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use fepheal::cfg::{CausalFaultGraph, Cpt, Dag, Variable};
use fepheal::logs::VarKind;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    fepheal::seed::rng_from(seed)
}

/// A distribution with every cell at least `floor` before normalising.
pub fn random_row<R: Rng>(rng: &mut R, arity: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..arity).map(|_| floor + rng.gen::<f64>()).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}

pub struct GraphShape {
    pub faults: usize,
    pub contexts: usize,
    pub max_parents: usize,
    pub edge_prob: f64,
    pub context_arity: usize,
}

/// Random CFG: faults first, then contexts; edges only go from lower to
/// higher index, so faults are roots or have fault parents.
pub fn random_graph<R: Rng>(rng: &mut R, shape: &GraphShape) -> CausalFaultGraph {
    let n = shape.faults + shape.contexts;
    let variables: Vec<Variable> = (0..n)
        .map(|i| {
            if i < shape.faults {
                Variable { id: format!("f{i}"), kind: VarKind::Fault, arity: 2 }
            } else {
                let kind = if rng.gen_bool(0.5) { VarKind::HwContext } else { VarKind::SwContext };
                let arity = if shape.context_arity > 2 { rng.gen_range(2..=shape.context_arity) } else { 2 };
                Variable { id: format!("x{i}"), kind, arity }
            }
        })
        .collect();
    let mut edges = Vec::new();
    for child in 1..n {
        let mut parents: Vec<usize> = (0..child).filter(|_| rng.gen_bool(shape.edge_prob)).collect();
        while parents.len() > shape.max_parents {
            parents.remove(rng.gen_range(0..parents.len()));
        }
        edges.extend(parents.into_iter().map(|p| (p, child)));
    }
    let dag = Dag::from_edges(n, &edges).expect("forward edges are acyclic");
    let cpts = (0..n)
        .map(|v| {
            let parent_arities: Vec<usize> = dag.parents(v).iter().map(|&p| variables[p].arity).collect();
            let q: usize = parent_arities.iter().product();
            let rows = (0..q).map(|_| random_row(rng, variables[v].arity, 0.05)).collect();
            Cpt { arity: variables[v].arity, parent_arities, rows }
        })
        .collect();
    CausalFaultGraph::new(variables, dag, cpts, 0).expect("valid random graph")
}

/// Random evidence on each context variable with probability `p`.
pub fn random_evidence<R: Rng>(rng: &mut R, g: &CausalFaultGraph, p: f64) -> BTreeMap<usize, u8> {
    let mut out = BTreeMap::new();
    for v in (0..g.len()).filter(|&v| g.variables[v].kind.is_context()) {
        if rng.gen_bool(p) {
            out.insert(v, rng.gen_range(0..g.variables[v].arity) as u8);
        }
    }
    out
}

/// P(states) from the tables, indexing rows by hand.
pub fn joint_prob(g: &CausalFaultGraph, states: &[u8]) -> f64 {
    let mut p = 1.0;
    for v in 0..g.len() {
        let mut j = 0usize;
        for &u in g.dag.parents(v) {
            j = j * g.variables[u].arity + states[u] as usize;
        }
        p *= g.cpts[v].rows[j][states[v] as usize];
    }
    p
}

/// Posterior marginals and P(evidence) by enumerating every completion.
pub struct Enumerated {
    pub evidence_prob: f64,
    pub marginals: BTreeMap<usize, Vec<f64>>,
}

pub fn enumerate(g: &CausalFaultGraph, evidence: &BTreeMap<usize, u8>) -> Enumerated {
    let free: Vec<usize> = (0..g.len()).filter(|v| !evidence.contains_key(v)).collect();
    let mut states = vec![0u8; g.len()];
    for (&v, &s) in evidence {
        states[v] = s;
    }
    let mut marginals: BTreeMap<usize, Vec<f64>> =
        free.iter().map(|&v| (v, vec![0.0; g.variables[v].arity])).collect();
    let mut total = 0.0;
    loop {
        let p = joint_prob(g, &states);
        total += p;
        for &v in &free {
            marginals.get_mut(&v).unwrap()[states[v] as usize] += p;
        }
        let mut k = free.len();
        loop {
            if k == 0 {
                for m in marginals.values_mut() {
                    m.iter_mut().for_each(|x| *x /= total);
                }
                return Enumerated { evidence_prob: total, marginals };
            }
            k -= 1;
            let v = free[k];
            states[v] += 1;
            if (states[v] as usize) < g.variables[v].arity {
                break;
            }
            states[v] = 0;
        }
    }
}

/// Least-squares fit y = a + b·x; returns (a, b, R²).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - a - b * x).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    (a, b, 1.0 - ss_res / ss_tot)
}

/// Undirected F1 between two edge sets.
pub fn skeleton_f1(learned: &[(usize, usize)], truth: &[(usize, usize)]) -> f64 {
    let norm = |e: &(usize, usize)| if e.0 < e.1 { *e } else { (e.1, e.0) };
    let l: std::collections::BTreeSet<_> = learned.iter().map(norm).collect();
    let t: std::collections::BTreeSet<_> = truth.iter().map(norm).collect();
    let tp = l.intersection(&t).count() as f64;
    if l.is_empty() && t.is_empty() {
        return 1.0;
    }
    if tp == 0.0 {
        return 0.0;
    }
    let precision = tp / l.len() as f64;
    let recall = tp / t.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

pub fn scenario_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}
