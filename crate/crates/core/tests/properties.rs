//! Property tests for structure learning, inference and planning.

mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::{enumerate, joint_prob, random_evidence, random_graph, random_row, rng, GraphShape};
use fepheal::action::{Action, ActionKind, Target};
use fepheal::cfg::{fit_cpts, hill_climb, score_structure, CausalFaultGraph, ClimbOptions, Columns, Dag, Variable};
use fepheal::inference::{
    exact_posterior, free_energy, minimize_free_energy, Belief, InferenceProblem, MeanFieldOptions,
};
use fepheal::logs::VarKind;
use fepheal::planner::{expected_free_energy, predict_beliefs, select_action, EfeEntry, PreferenceModel, EPSILON_G};
use proptest::prelude::*;
use rand::Rng;

fn shape(faults: usize, contexts: usize) -> GraphShape {
    GraphShape { faults, contexts, max_parents: 3, edge_prob: 0.4, context_arity: 3 }
}

fn small_graph<R: Rng>(r: &mut R, bound: usize) -> CausalFaultGraph {
    let s = shape(r.gen_range(1..bound), r.gen_range(1..bound));
    random_graph(r, &s)
}

fn sampled_rows(g: &CausalFaultGraph, n: usize, seed: u64) -> Vec<Vec<u8>> {
    let mut r = rng(seed);
    let order = g.dag.topological_order().unwrap();
    (0..n)
        .map(|_| {
            let mut s = vec![0u8; g.len()];
            for &v in &order {
                let row = &g.cpts[v].rows[g.config(v, &s)];
                let u: f64 = r.gen();
                let mut acc = 0.0;
                s[v] = (row.len() - 1) as u8;
                for (k, p) in row.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        s[v] = k as u8;
                        break;
                    }
                }
            }
            s
        })
        .collect()
}

fn preferences_for(g: &CausalFaultGraph, seed: u64) -> PreferenceModel {
    let mut r = rng(seed);
    PreferenceModel::new(
        (0..g.len())
            .filter(|&v| g.variables[v].kind.is_context())
            .map(|v| (g.variables[v].id.clone(), random_row(&mut r, g.arity(v), 0.01)))
            .collect(),
    )
    .unwrap()
}

fn random_action(g: &CausalFaultGraph, seed: u64) -> Action {
    let mut r = rng(seed);
    let mut intervention = BTreeMap::new();
    for v in (0..g.len()).filter(|&v| !g.variables[v].kind.is_context()) {
        if r.gen_bool(0.6) {
            intervention.insert(g.variables[v].id.clone(), r.gen::<f64>());
        }
    }
    Action { id: format!("a{seed}"), kind: ActionKind::RestartNode, target: Target::None, intervention }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn climb_output_is_acyclic_bounded_and_monotone(seed in any::<u64>(), n in 50usize..400, max_parents in 1usize..4) {
        let mut r = rng(seed);
        let g = random_graph(&mut r, &shape(3, 3));
        let rows = sampled_rows(&g, n, seed ^ 1);
        let data = Columns::from_rows(g.variables.iter().map(|v| v.arity).collect(), &rows);
        let opts = ClimbOptions { max_parents, restarts: 2, seed, ..ClimbOptions::default() };
        let res = hill_climb(&data, None, &opts).unwrap();
        prop_assert!(res.dag.is_acyclic());
        prop_assert!(res.dag.max_in_degree() <= max_parents);
        for w in res.trace.windows(2) {
            prop_assert!(w[1] - w[0] > opts.epsilon);
        }
        let again = hill_climb(&data, None, &opts).unwrap();
        prop_assert_eq!(res.dag, again.dag);
    }

    #[test]
    fn score_is_the_sum_of_families_and_prior(seed in any::<u64>(), lambda in 0.0f64..5.0) {
        let mut r = rng(seed);
        let g = random_graph(&mut r, &shape(3, 3));
        let prev = random_graph(&mut r, &shape(3, 3)).dag;
        let rows = sampled_rows(&g, 100, seed);
        let data = Columns::from_rows(g.variables.iter().map(|v| v.arity).collect(), &rows);
        let s = score_structure(&g.dag, &data, 1.0, Some(&prev), lambda).unwrap();
        let sum: f64 = s.families.iter().sum::<f64>() + s.prior;
        prop_assert!((s.total - sum).abs() <= 1e-9);
        prop_assert!((s.prior + lambda * g.dag.hamming(&prev) as f64).abs() <= 1e-12);
    }

    #[test]
    fn changing_one_family_changes_only_its_component(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = random_graph(&mut r, &shape(3, 3));
        let rows = sampled_rows(&g, 150, seed);
        let data = Columns::from_rows(g.variables.iter().map(|v| v.arity).collect(), &rows);
        let before = score_structure(&g.dag, &data, 1.0, None, 0.0).unwrap();
        let n = g.len();
        let (a, b) = (r.gen_range(0..n), r.gen_range(0..n));
        let mut dag = g.dag.clone();
        let changed = if dag.has_edge(a, b) {
            dag.remove_edge(a, b)
        } else {
            a != b && dag.add_edge(a, b).is_ok()
        };
        prop_assume!(changed);
        let after = score_structure(&dag, &data, 1.0, None, 0.0).unwrap();
        for v in 0..n {
            if v != b {
                prop_assert_eq!(before.families[v], after.families[v]);
            }
        }
    }

    #[test]
    fn fitted_rows_are_distributions(seed in any::<u64>(), n in 0usize..300, ess in 0.1f64..20.0) {
        let mut r = rng(seed);
        let g = random_graph(&mut r, &shape(3, 4));
        let rows = sampled_rows(&g, n, seed);
        let data = Columns::from_rows(g.variables.iter().map(|v| v.arity).collect(), &rows);
        let fitted = fit_cpts(g.variables.clone(), g.dag.clone(), &data, ess, 1).unwrap();
        for cpt in &fitted.cpts {
            for row in &cpt.rows {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                prop_assert!(row.iter().all(|&p| p > 0.0));
            }
        }
    }

    #[test]
    fn mean_field_marginals_are_normalised_and_bounded_by_evidence(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = small_graph(&mut r, 6);
        let ev = random_evidence(&mut r, &g, 0.6);
        let p = InferenceProblem::new(&g, &ev).unwrap();
        let (b, _) = minimize_free_energy(&p, None, &MeanFieldOptions::default()).unwrap();
        prop_assert!(b.free_energy.is_finite());
        for m in b.marginals.values() {
            prop_assert!((m.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
        let nle = -enumerate(&g, &ev).evidence_prob.ln();
        prop_assert!(b.free_energy >= nle - 1e-12);
        let ex = exact_posterior(&p).unwrap();
        prop_assert!((ex.neg_log_evidence - nle).abs() <= 1e-9);
    }

    #[test]
    fn do_nothing_is_the_identity(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = small_graph(&mut r, 6);
        let ev = random_evidence(&mut r, &g, 0.6);
        let p = InferenceProblem::new(&g, &ev).unwrap();
        let b = Belief::from_marginals(p.latent().iter().map(|&v| (v, random_row(&mut r, g.arity(v), 0.0))).collect());
        let q = predict_beliefs(&p, &b, &Action::do_nothing()).unwrap();
        prop_assert_eq!(&q.marginals, &b.marginals);
        prop_assert_eq!(q.free_energy.to_bits(), b.free_energy.to_bits());
    }

    #[test]
    fn intervened_mass_is_scaled_and_marginals_stay_normalised(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = small_graph(&mut r, 6);
        let ev = random_evidence(&mut r, &g, 0.6);
        let p = InferenceProblem::new(&g, &ev).unwrap();
        let (b, _) = minimize_free_energy(&p, None, &MeanFieldOptions::default()).unwrap();
        let a = random_action(&g, seed);
        let q = predict_beliefs(&p, &b, &a).unwrap();
        for (id, rho) in &a.intervention {
            let v = g.index_of(id).unwrap();
            prop_assert!((q.active(v).unwrap() - (1.0 - rho) * b.active(v).unwrap()).abs() <= 1e-12);
        }
        for m in q.marginals.values() {
            prop_assert!((m.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn efe_total_decomposes_into_nonnegative_terms(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = small_graph(&mut r, 6);
        let ev = random_evidence(&mut r, &g, 0.6);
        let p = InferenceProblem::new(&g, &ev).unwrap();
        let (b, _) = minimize_free_energy(&p, None, &MeanFieldOptions::default()).unwrap();
        let prefs = preferences_for(&g, seed);
        for a in [Action::do_nothing(), random_action(&g, seed)] {
            let q = predict_beliefs(&p, &b, &a).unwrap();
            let terms = expected_free_energy(&g, &q, &prefs).unwrap();
            let e = EfeEntry::new(a, terms, 0.0);
            prop_assert!((e.total - (e.risk + e.ambiguity)).abs() <= 1e-12);
            prop_assert!(e.risk >= -1e-12 && e.ambiguity >= -1e-12);
        }
    }

    #[test]
    fn selection_is_never_worse_than_waiting(seed in any::<u64>(), n_actions in 1usize..6) {
        let mut r = rng(seed);
        let g = small_graph(&mut r, 6);
        let ev = random_evidence(&mut r, &g, 0.6);
        let p = InferenceProblem::new(&g, &ev).unwrap();
        let (b, _) = minimize_free_energy(&p, None, &MeanFieldOptions::default()).unwrap();
        let prefs = preferences_for(&g, seed);
        let actions = std::iter::once(Action::do_nothing())
            .chain((0..n_actions as u64).map(|k| random_action(&g, seed.wrapping_add(k))));
        let entries: Vec<EfeEntry> = actions
            .map(|a| {
                let q = predict_beliefs(&p, &b, &a).unwrap();
                EfeEntry::new(a, expected_free_energy(&g, &q, &prefs).unwrap(), 0.0)
            })
            .collect();
        let chosen = select_action(&entries, EPSILON_G).unwrap();
        prop_assert!(chosen.total <= entries[0].total + 1e-12);
    }
}

/// Brute-force check that `mb` screens `v` off from everything else: for
/// every full assignment, P(v | rest) = P(v | mb).
fn screens_off(g: &CausalFaultGraph, v: usize, mb: &BTreeSet<usize>) -> bool {
    let n = g.len();
    let total: usize = (0..n).map(|u| g.arity(u)).product();
    let mut given_rest = BTreeMap::new();
    let mut given_mb: BTreeMap<Vec<u8>, Vec<f64>> = BTreeMap::new();
    for idx in 0..total {
        let mut s = vec![0u8; n];
        let mut rem = idx;
        for u in (0..n).rev() {
            s[u] = (rem % g.arity(u)) as u8;
            rem /= g.arity(u);
        }
        let p = joint_prob(g, &s);
        let rest: Vec<u8> = (0..n).filter(|&u| u != v).map(|u| s[u]).collect();
        let key: Vec<u8> = mb.iter().map(|&u| s[u]).collect();
        given_rest.entry(rest).or_insert_with(|| vec![0.0; g.arity(v)])[s[v] as usize] += p;
        given_mb.entry(key).or_insert_with(|| vec![0.0; g.arity(v)])[s[v] as usize] += p;
    }
    let normalise = |m: &[f64]| {
        let z: f64 = m.iter().sum();
        m.iter().map(|x| x / z).collect::<Vec<f64>>()
    };
    for idx in 0..total {
        let mut s = vec![0u8; n];
        let mut rem = idx;
        for u in (0..n).rev() {
            s[u] = (rem % g.arity(u)) as u8;
            rem /= g.arity(u);
        }
        let rest: Vec<u8> = (0..n).filter(|&u| u != v).map(|u| s[u]).collect();
        let key: Vec<u8> = mb.iter().map(|&u| s[u]).collect();
        let a = normalise(&given_rest[&rest]);
        let b = normalise(&given_mb[&key]);
        if a.iter().zip(&b).any(|(x, y)| (x - y).abs() > 1e-9) {
            return false;
        }
    }
    true
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn markov_blanket_is_the_minimal_screening_set(seed in any::<u64>(), n in 2usize..=5) {
        let mut r = rng(seed);
        let variables: Vec<Variable> =
            (0..n).map(|i| Variable { id: format!("v{i}"), kind: VarKind::Fault, arity: 2 }).collect();
        let edges: Vec<(usize, usize)> =
            (0..n).flat_map(|b| (0..b).map(move |a| (a, b))).filter(|_| r.gen_bool(0.5)).collect();
        let dag = Dag::from_edges(n, &edges).unwrap();
        let cpts = (0..n)
            .map(|v| {
                let q = 1usize << dag.parents(v).len();
                fepheal::cfg::Cpt {
                    arity: 2,
                    parent_arities: vec![2; dag.parents(v).len()],
                    rows: (0..q).map(|_| random_row(&mut r, 2, 0.2)).collect(),
                }
            })
            .collect();
        let g = CausalFaultGraph::new(variables, dag, cpts, 0).unwrap();
        for v in 0..n {
            let mb = g.markov_blanket(v).unwrap();
            prop_assert!(!mb.contains(&v));
            prop_assert!(screens_off(&g, v, &mb));
            for &u in &mb {
                let mut smaller = mb.clone();
                smaller.remove(&u);
                prop_assert!(!screens_off(&g, v, &smaller), "blanket of {} is not minimal without {}", v, u);
            }
        }
    }
}

#[test]
fn free_energy_of_random_beliefs_bounds_the_evidence() {
    let mut r = rng(9);
    for _ in 0..200 {
        let g = small_graph(&mut r, 5);
        let ev = random_evidence(&mut r, &g, 0.6);
        let p = InferenceProblem::new(&g, &ev).unwrap();
        let nle = -enumerate(&g, &ev).evidence_prob.ln();
        let b = Belief::from_marginals(p.latent().iter().map(|&v| (v, random_row(&mut r, g.arity(v), 0.0))).collect());
        assert!(free_energy(&p, &b).unwrap() >= nle - 1e-12);
    }
}
