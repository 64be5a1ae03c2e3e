//! Shared fixtures for the benchmarks.

use std::collections::BTreeMap;

use fepheal::cfg::{CausalFaultGraph, Cpt, Dag, Variable};
use fepheal::logs::VarKind;
use rand::Rng;

/// Sparse binary graph over `d` variables: the first quarter are faults and
/// each later variable draws about two parents from earlier ones.
pub fn sparse_graph(d: usize, seed: u64) -> CausalFaultGraph {
    let mut rng = fepheal::seed::rng_from(seed);
    let faults = (d / 4).max(1);
    let variables: Vec<Variable> = (0..d)
        .map(|i| {
            let (id, kind) = if i < faults {
                (format!("f{i}"), VarKind::Fault)
            } else {
                (format!("x{i}"), VarKind::HwContext)
            };
            Variable { id, kind, arity: 2 }
        })
        .collect();
    let p = (2.0 / d as f64).min(1.0);
    let mut edges = Vec::new();
    for child in 1..d {
        let mut parents: Vec<usize> = (0..child).filter(|_| rng.gen_bool(p)).collect();
        parents.truncate(2);
        edges.extend(parents.into_iter().map(|u| (u, child)));
    }
    let dag = Dag::from_edges(d, &edges).expect("forward edges");
    let cpts = (0..d)
        .map(|v| {
            let parent_arities = vec![2; dag.parents(v).len()];
            let rows = (0..1usize << parent_arities.len())
                .map(|_| {
                    let a = 0.05 + 0.9 * rng.gen::<f64>();
                    vec![a, 1.0 - a]
                })
                .collect();
            Cpt { arity: 2, parent_arities, rows }
        })
        .collect();
    CausalFaultGraph::new(variables, dag, cpts, 0).expect("valid graph")
}

/// Ancestral samples of every variable.
pub fn sample_rows(g: &CausalFaultGraph, n: usize, seed: u64) -> Vec<Vec<u8>> {
    let mut rng = fepheal::seed::rng_from(seed);
    let order = g.dag.topological_order().expect("acyclic");
    (0..n)
        .map(|_| {
            let mut states = vec![0u8; g.len()];
            for &v in &order {
                let row = &g.cpts[v].rows[g.config(v, &states)];
                states[v] = u8::from(rng.gen::<f64>() >= row[0]);
            }
            states
        })
        .collect()
}

/// Evidence on every context variable taken from one sample.
pub fn context_evidence(g: &CausalFaultGraph, seed: u64) -> BTreeMap<usize, u8> {
    let row = sample_rows(g, 1, seed).remove(0);
    (0..g.len()).filter(|&v| g.variables[v].kind.is_context()).map(|v| (v, row[v])).collect()
}
