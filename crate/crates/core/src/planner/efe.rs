use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{PlannerError, PreferenceModel};
use crate::action::Action;
use crate::cfg::{CausalFaultGraph, Cpt};
use crate::inference::{free_energy_dense, latent_order, Belief, Frozen, InferenceError, InferenceProblem, InferenceStats, Updater};

/// Q(f | a): intervened faults have their active mass scaled by (1 − ρ) and
/// their incoming edges cut; their latent descendants then get one
/// mean-field update against the frozen intervened marginals. Do-nothing
/// returns `belief` unchanged.
pub fn predict_beliefs(problem: &InferenceProblem<'_>, belief: &Belief, action: &Action) -> Result<Belief, PlannerError> {
    if action.intervention.is_empty() {
        return Ok(belief.clone());
    }
    let g = problem.graph;
    let mut cut = g.clone();
    let mut forced = BTreeMap::new();
    for (id, &rho) in &action.intervention {
        let v = g.index_of(id).ok_or_else(|| PlannerError::UnknownVariable(id.clone()))?;
        if !problem.is_latent(v) {
            return Err(PlannerError::InvalidAction(format!("{}: `{id}` is observed", action.id)));
        }
        if !(0.0..=1.0).contains(&rho) {
            return Err(PlannerError::InvalidAction(format!("{}: rho {rho}", action.id)));
        }
        let mut m = belief
            .marginals
            .get(&v)
            .cloned()
            .ok_or_else(|| InferenceError::MissingMarginal(id.clone()))?;
        let last = m.len() - 1;
        let removed = m[last] * rho;
        m[last] -= removed;
        m[0] += removed;
        cut.dag.set_parents(v, Vec::new());
        cut.cpts[v] = Cpt {
            arity: m.len(),
            parent_arities: Vec::new(),
            rows: vec![m.clone()],
        };
        forced.insert(v, m);
    }
    let cut_problem = InferenceProblem::new(&cut, &problem.evidence_map())?;
    let mut q = belief.dense(&cut_problem)?;
    for (&v, m) in &forced {
        q[v] = m.clone();
    }
    let frozen: Frozen = forced.keys().copied().collect();
    let mut up = Updater {
        problem: &cut_problem,
        q,
        stats: InferenceStats::default(),
        record_reads: false,
    };
    // Only descendants of an intervention can move; everything else keeps
    // its posterior.
    let mut affected = vec![false; cut.len()];
    let mut stack: Vec<usize> = frozen.iter().copied().collect();
    while let Some(u) = stack.pop() {
        for c in cut.children(u) {
            if !affected[c] {
                affected[c] = true;
                stack.push(c);
            }
        }
    }
    up.begin_sweep();
    for v in latent_order(&cut_problem, &frozen).into_iter().filter(|&v| affected[v]) {
        up.update(v)?;
    }
    let free_energy = free_energy_dense(&cut_problem, &up.q)?;
    Ok(Belief {
        marginals: up.marginals(),
        free_energy,
        sweeps: 1,
        converged: false,
        trace: vec![free_energy],
    })
}

/// Predicted marginal and expected entropy of one context variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturePrediction {
    pub marginal: Vec<f64>,
    /// E over predicted parents of H(P(x | pa)), in nats.
    pub expected_entropy: f64,
}

fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

/// Q(x_j | a) for every context variable, in topological order: each CPT row
/// weighted by the product of the parents' predicted marginals. Fault
/// marginals come from `faults`; context parents use their own prediction.
pub fn predictive_features(
    graph: &CausalFaultGraph,
    faults: &BTreeMap<usize, Vec<f64>>,
) -> Result<BTreeMap<usize, FeaturePrediction>, PlannerError> {
    let order = graph.dag.topological_order().ok_or(PlannerError::Cyclic)?;
    let mut dist: Vec<Option<Vec<f64>>> = vec![None; graph.len()];
    let mut out = BTreeMap::new();
    for v in order {
        if !graph.variables[v].kind.is_context() {
            dist[v] = faults.get(&v).cloned();
            continue;
        }
        let cpt = &graph.cpts[v];
        let parents = graph.parents(v);
        let pd: Vec<&Vec<f64>> = parents
            .iter()
            .map(|&p| {
                dist[p]
                    .as_ref()
                    .ok_or_else(|| PlannerError::Inference(InferenceError::MissingMarginal(graph.variables[p].id.clone())))
            })
            .collect::<Result<_, _>>()?;
        let mut marginal = vec![0.0; cpt.arity];
        let mut expected_entropy = 0.0;
        for (j, row) in cpt.rows.iter().enumerate() {
            let w: f64 = cpt.states_of(j).iter().zip(&pd).map(|(&s, d)| d[s as usize]).product();
            if w == 0.0 {
                continue;
            }
            marginal.iter_mut().zip(row).for_each(|(m, &p)| *m += w * p);
            expected_entropy += w * entropy(row);
        }
        dist[v] = Some(marginal.clone());
        out.insert(v, FeaturePrediction { marginal, expected_entropy });
    }
    Ok(out)
}

fn kl(q: &[f64], p: &[f64]) -> f64 {
    q.iter().zip(p).filter(|(&a, _)| a > 0.0).map(|(&a, &b)| a * (a / b).ln()).sum()
}

/// Risk and ambiguity of a predicted belief.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfeTerms {
    pub risk: f64,
    pub ambiguity: f64,
}

/// risk = Σ_j KL(Q(x_j|a) ‖ P*(x_j)), ambiguity = Σ_j E[H(P(x_j | pa_j))],
/// summed over context variables, in nats.
pub fn expected_free_energy(
    graph: &CausalFaultGraph,
    predicted: &Belief,
    preferences: &PreferenceModel,
) -> Result<EfeTerms, PlannerError> {
    let features = predictive_features(graph, &predicted.marginals)?;
    let mut terms = EfeTerms { risk: 0.0, ambiguity: 0.0 };
    for (v, f) in features {
        let id = &graph.variables[v].id;
        let p = preferences.get(id).ok_or_else(|| PlannerError::UnknownVariable(id.clone()))?;
        if p.len() != f.marginal.len() {
            return Err(PlannerError::InvalidPreference(id.clone()));
        }
        terms.risk += kl(&f.marginal, p);
        terms.ambiguity += f.expected_entropy;
    }
    Ok(terms)
}

/// One scored candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfeEntry {
    pub action: Action,
    pub risk: f64,
    pub ambiguity: f64,
    /// Additive action cost; zero unless costs are configured.
    pub cost: f64,
    pub total: f64,
}

impl EfeEntry {
    pub fn new(action: Action, terms: EfeTerms, cost: f64) -> Self {
        EfeEntry {
            action,
            risk: terms.risk,
            ambiguity: terms.ambiguity,
            cost,
            total: terms.risk + terms.ambiguity + cost,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfeReport {
    pub entries: Vec<EfeEntry>,
    pub chosen: String,
}

/// Default tolerance under which two totals count as tied.
pub const EPSILON_G: f64 = 1e-9;

/// argmin G; totals within `epsilon` of the minimum tie, and ties go to
/// do-nothing, then to the smallest action id.
pub fn select_action(entries: &[EfeEntry], epsilon: f64) -> Result<&EfeEntry, PlannerError> {
    if entries.is_empty() {
        return Err(PlannerError::EmptyReport);
    }
    if !entries.iter().any(|e| e.action.is_do_nothing()) {
        return Err(PlannerError::MissingDoNothing);
    }
    let min = entries.iter().map(|e| e.total).fold(f64::INFINITY, f64::min);
    let tied = entries.iter().filter(|e| e.total <= min + epsilon);
    let chosen = tied
        .min_by(|a, b| {
            (!a.action.is_do_nothing(), &a.action.id).cmp(&(!b.action.is_do_nothing(), &b.action.id))
        })
        .expect("minimum is attained");
    Ok(chosen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{ActionKind, Target};
    use crate::cfg::{Dag, Variable};
    use crate::logs::VarKind;

    /// f → x with P(f=1)=0.2, P(x=1|f=1)=0.9, P(x=1|f=0)=0.1; x a context feature.
    fn net() -> CausalFaultGraph {
        let vars = vec![
            Variable { id: "f".into(), kind: VarKind::Fault, arity: 2 },
            Variable { id: "x".into(), kind: VarKind::HwContext, arity: 2 },
        ];
        let cpts = vec![
            Cpt { arity: 2, parent_arities: vec![], rows: vec![vec![0.8, 0.2]] },
            Cpt { arity: 2, parent_arities: vec![2], rows: vec![vec![0.9, 0.1], vec![0.1, 0.9]] },
        ];
        CausalFaultGraph::new(vars, Dag::from_edges(2, &[(0, 1)]).unwrap(), cpts, 0).unwrap()
    }

    fn restart(rho: f64) -> Action {
        Action::new(ActionKind::RestartNode, Target::Node { node: "n".into() }, [("f".to_string(), rho)].into())
    }

    fn posterior(g: &CausalFaultGraph) -> (InferenceProblem<'_>, Belief) {
        let p = InferenceProblem::new(g, &[(1usize, 1u8)].into()).unwrap();
        let b = crate::inference::exact_posterior(&p).unwrap().belief;
        (p, b)
    }

    fn prefs() -> PreferenceModel {
        PreferenceModel::new([("x".to_string(), vec![0.9, 0.1])].into()).unwrap()
    }

    #[test]
    fn do_nothing_is_the_identity() {
        let g = net();
        let (p, b) = posterior(&g);
        assert_eq!(predict_beliefs(&p, &b, &Action::do_nothing()).unwrap(), b);
    }

    #[test]
    fn restart_scales_the_active_mass() {
        let g = net();
        let (p, b) = posterior(&g);
        let q = predict_beliefs(&p, &b, &restart(0.9)).unwrap();
        assert!((q.active(0).unwrap() - 0.1 * 9.0 / 13.0).abs() < 1e-15);
        assert_eq!(predict_beliefs(&p, &b, &restart(1.0)).unwrap().active(0), Some(0.0));
    }

    #[test]
    fn feature_marginal_is_the_weighted_table() {
        let g = net();
        let f = predictive_features(&g, &[(0usize, vec![0.82, 0.18])].into()).unwrap();
        assert!((f[&1].marginal[1] - (0.18 * 0.9 + 0.82 * 0.1)).abs() < 1e-15);
    }

    #[test]
    fn restart_beats_waiting_on_the_single_fault_net() {
        let g = net();
        let (p, b) = posterior(&g);
        let h = -(0.9f64 * 0.9f64.ln() + 0.1 * 0.1f64.ln());
        let kl = |q: f64| q * (q / 0.1).ln() + (1.0 - q) * ((1.0 - q) / 0.9).ln();
        let idle = expected_free_energy(&g, &b, &prefs()).unwrap();
        let q1 = 9.0 / 13.0 * 0.9 + 4.0 / 13.0 * 0.1;
        assert!((idle.risk - kl(q1)).abs() < 1e-12);
        assert!((idle.ambiguity - h).abs() < 1e-12);
        let acted = expected_free_energy(&g, &predict_beliefs(&p, &b, &restart(0.9)).unwrap(), &prefs()).unwrap();
        let qa = 0.9 / 13.0 * 0.9 + (1.0 - 0.9 / 13.0) * 0.1;
        assert!((acted.risk - kl(qa)).abs() < 1e-12);
        let entries = vec![
            EfeEntry::new(Action::do_nothing(), idle, 0.0),
            EfeEntry::new(restart(0.9), acted, 0.0),
        ];
        assert_eq!(select_action(&entries, EPSILON_G).unwrap().action.id, "restart-node:n");
    }

    #[test]
    fn ties_go_to_do_nothing_and_empty_is_an_error() {
        let t = EfeTerms { risk: 0.5, ambiguity: 0.25 };
        let entries = vec![EfeEntry::new(restart(0.9), t, 0.0), EfeEntry::new(Action::do_nothing(), t, 0.0)];
        assert!(select_action(&entries, EPSILON_G).unwrap().action.is_do_nothing());
        assert!(matches!(select_action(&[], EPSILON_G), Err(PlannerError::EmptyReport)));
        assert!(matches!(select_action(&entries[..1], EPSILON_G), Err(PlannerError::MissingDoNothing)));
    }

    #[test]
    fn deterministic_tables_have_no_ambiguity() {
        let mut g = net();
        g.cpts[1].rows = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let b = Belief::from_marginals([(0usize, vec![0.3, 0.7])].into());
        let t = expected_free_energy(&g, &b, &prefs()).unwrap();
        assert_eq!(t.ambiguity, 0.0);
    }
}
