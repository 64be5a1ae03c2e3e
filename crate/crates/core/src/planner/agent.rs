use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::catalog::{enumerate_actions, Catalog, Escalation, NodeBeliefs};
use super::efe::{expected_free_energy, predict_beliefs, select_action, EfeEntry, EfeReport, EfeTerms, EPSILON_G};
use super::PreferenceModel;
use crate::action::{Action, ActionKind};
use crate::cfg::{fit_cpts, hill_climb, CausalFaultGraph, ClimbOptions, ClimbResult, Columns, Variable};
use crate::inference::{
    attribute_origin, minimize_free_energy, Attribution, Belief, InferenceProblem, InferenceStats, MeanFieldOptions,
    DETECTION_THRESHOLD,
};
use crate::logs::{collect_incremental, fit_bins, merge_rounds, normalize, Anchors, BinSpec, EvidenceBatch, FeatureMatrix, MetricCatalog, Schema};
use crate::seed::derive_seed;
use crate::sim::{apply_intervention, ContinuumState, InterventionOutcome, NodeId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    /// Bins per metric.
    pub k: usize,
    /// Evidence window in rounds; 0 keeps everything.
    pub window: u64,
    pub climb: ClimbOptions,
    pub mean_field: MeanFieldOptions,
    pub epsilon_g: f64,
    /// Preferred mass on each metric's healthy bin.
    pub nominal_mass: f64,
    pub catalog: Catalog,
    /// Additive per-type cost on G; empty by default.
    pub action_costs: BTreeMap<ActionKind, f64>,
    /// Score as usual but always execute do-nothing.
    pub force_do_nothing: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            k: 3,
            window: 50,
            climb: ClimbOptions::default(),
            mean_field: MeanFieldOptions::default(),
            epsilon_g: EPSILON_G,
            nominal_mass: 0.9,
            catalog: Catalog::default(),
            action_costs: BTreeMap::new(),
            force_do_nothing: false,
        }
    }
}

impl AgentConfig {
    fn window(&self) -> Option<u64> {
        (self.window > 0).then_some(self.window)
    }

    pub fn validate(&self) -> Result<(), super::PlannerError> {
        use super::PlannerError::InvalidConfig;
        if !(2..=16).contains(&self.k) {
            return Err(InvalidConfig(format!("k = {} outside 2..=16", self.k)));
        }
        let c = &self.climb;
        if !(c.ess > 0.0) || !(c.lambda >= 0.0) || !(c.epsilon >= 0.0) || c.max_parents == 0 {
            return Err(InvalidConfig("ess > 0, lambda >= 0, epsilon >= 0, max_parents >= 1".into()));
        }
        if !(self.mean_field.tol > 0.0) || self.mean_field.max_sweeps == 0 {
            return Err(InvalidConfig("mean-field tol > 0 and max_sweeps >= 1".into()));
        }
        if !(self.epsilon_g >= 0.0 && self.epsilon_g < 1e-3) {
            return Err(InvalidConfig(format!("epsilon_g = {}", self.epsilon_g)));
        }
        if !(self.nominal_mass > 0.0 && self.nominal_mass < 1.0) {
            return Err(InvalidConfig(format!("nominal_mass = {}", self.nominal_mass)));
        }
        if let Some((k, c)) = self.action_costs.iter().find(|(_, c)| !c.is_finite()) {
            return Err(InvalidConfig(format!("cost {c} for {k}")));
        }
        self.catalog.validate()
    }
}

#[derive(Debug, Error)]
#[error("{stage} stage failed: {message}")]
pub struct AgentError {
    pub stage: &'static str,
    pub message: String,
}

fn stage<E: std::fmt::Display>(stage: &'static str) -> impl FnOnce(E) -> AgentError {
    move |e| AgentError {
        stage,
        message: e.to_string(),
    }
}

/// Inference result for one node's row of the current round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeInference {
    pub node: NodeId,
    pub row: Vec<u8>,
    pub belief: Belief,
    pub stats: InferenceStats,
    /// Hardware/software attribution of each detected fault.
    pub origins: BTreeMap<String, Attribution>,
}

/// Line-delimited per-round decision record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub round: u64,
    pub candidates: Vec<EfeEntry>,
    pub chosen: String,
    pub effective: bool,
    pub rejected: Option<String>,
    /// Q(f = active) per node at selection time.
    pub beliefs: NodeBeliefs,
    /// Predicted Q(f = active | chosen) on the targeted node.
    pub predicted: BTreeMap<String, f64>,
}

impl DecisionRecord {
    pub fn report(&self) -> EfeReport {
        EfeReport {
            entries: self.candidates.clone(),
            chosen: self.chosen.clone(),
        }
    }
}

/// Everything one round produced.
#[derive(Debug, Clone)]
pub struct RoundOutput {
    pub decision: DecisionRecord,
    pub graph: CausalFaultGraph,
    pub climb: ClimbResult,
    pub features: FeatureMatrix,
    pub inferences: Vec<NodeInference>,
    pub outcome: InterventionOutcome,
}

/// Agent memory carried between rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub config: AgentConfig,
    pub seed: u64,
    pub bins: BinSpec,
    pub preferences: PreferenceModel,
    pub anchors: Anchors,
    pub evidence: EvidenceBatch,
    pub graph: Option<CausalFaultGraph>,
    pub escalation: Escalation,
    pub rounds: u64,
}

fn active_map(graph: &CausalFaultGraph, belief: &Belief) -> BTreeMap<String, f64> {
    belief
        .marginals
        .iter()
        .filter(|(&v, _)| !graph.variables[v].kind.is_context())
        .map(|(&v, m)| (graph.variables[v].id.clone(), *m.last().expect("non-empty marginal")))
        .collect()
}

impl AgentState {
    /// Fits bins on every log written so far and seeds the evidence window.
    pub fn bootstrap(
        config: AgentConfig,
        state: &ContinuumState,
        catalog: &MetricCatalog,
        seed: u64,
    ) -> Result<Self, AgentError> {
        config.validate().map_err(stage("config"))?;
        let mut anchors = Anchors::new();
        let delta = collect_incremental(state, &anchors, state.round);
        let bins = fit_bins(delta.iter(), catalog, config.k).map_err(stage("fit-bins"))?;
        let features = normalize(&delta, &bins);
        let evidence =
            merge_rounds(EvidenceBatch::new(Schema::from_bins(&bins)), &features, config.window()).map_err(stage("merge"))?;
        delta.advance(&mut anchors);
        let preferences = PreferenceModel::from_bins(&bins, config.nominal_mass).map_err(stage("preferences"))?;
        Ok(AgentState {
            config,
            seed,
            bins,
            preferences,
            anchors,
            evidence,
            graph: None,
            escalation: Escalation::default(),
            rounds: 0,
        })
    }

    /// One perception, inference, action and update cycle.
    ///
    /// Agent memory is only written once every stage has succeeded, so a
    /// failed round leaves it at the previous anchors.
    pub fn agent_round(&mut self, state: &mut ContinuumState) -> Result<RoundOutput, AgentError> {
        let round = state.round;
        let cfg = &self.config;
        let delta = collect_incremental(state, &self.anchors, round);
        let features = normalize(&delta, &self.bins);
        let evidence = merge_rounds(self.evidence.clone(), &features, cfg.window()).map_err(stage("merge"))?;

        let columns = Columns::from_batch(&evidence);
        let opts = ClimbOptions {
            seed: derive_seed(self.seed, "hill-climb", round),
            ..cfg.climb.clone()
        };
        let previous = self.graph.as_ref().map(|g| &g.dag);
        let climb = hill_climb(&columns, previous, &opts).map_err(stage("hill-climb"))?;
        let variables = Variable::from_schema(evidence.schema());
        let graph = fit_cpts(variables, climb.dag.clone(), &columns, cfg.climb.ess, round).map_err(stage("fit-cpts"))?;

        let mut inferences: BTreeMap<NodeId, NodeInference> = BTreeMap::new();
        for r in 0..features.n_rows() {
            let row = features.row(r);
            let problem = InferenceProblem::from_row(&graph, row).map_err(stage("inference"))?;
            let (belief, stats) = minimize_free_energy(&problem, None, &cfg.mean_field).map_err(stage("inference"))?;
            let mut origins = BTreeMap::new();
            for (&v, m) in &belief.marginals {
                let var = &graph.variables[v];
                if !var.kind.is_context() && m[m.len() - 1] > DETECTION_THRESHOLD {
                    origins.insert(var.id.clone(), attribute_origin(&problem, v).map_err(stage("attribution"))?);
                }
            }
            let node = features.keys[r].node.clone();
            inferences.insert(
                node.clone(),
                NodeInference {
                    node,
                    row: row.to_vec(),
                    belief,
                    stats,
                    origins,
                },
            );
        }

        let beliefs: NodeBeliefs = inferences
            .iter()
            .map(|(n, inf)| (n.clone(), active_map(&graph, &inf.belief)))
            .collect();
        let mut escalation = self.escalation.clone();
        escalation.observe(&beliefs, cfg.catalog.threshold);
        let actions = enumerate_actions(state, &beliefs, &cfg.catalog, &escalation);

        let problems: BTreeMap<&NodeId, InferenceProblem<'_>> = inferences
            .iter()
            .map(|(n, inf)| InferenceProblem::from_row(&graph, &inf.row).map(|p| (n, p)))
            .collect::<Result<_, _>>()
            .map_err(stage("planning"))?;
        let idle: BTreeMap<&NodeId, EfeTerms> = inferences
            .iter()
            .map(|(n, inf)| expected_free_energy(&graph, &inf.belief, &self.preferences).map(|t| (n, t)))
            .collect::<Result<_, _>>()
            .map_err(stage("planning"))?;
        let mut candidates = Vec::with_capacity(actions.len());
        let mut predictions = BTreeMap::new();
        for action in actions {
            let target = action.target.node().filter(|n| inferences.contains_key(*n)).cloned();
            let replaced = match &target {
                Some(node) => {
                    let inf = &inferences[node];
                    let predicted = predict_beliefs(&problems[node], &inf.belief, &action).map_err(stage("planning"))?;
                    let terms = expected_free_energy(&graph, &predicted, &self.preferences).map_err(stage("planning"))?;
                    predictions.insert(action.id.clone(), active_map(&graph, &predicted));
                    Some((node.clone(), terms))
                }
                None => None,
            };
            // Sum node terms in a fixed order, swapping in the target's.
            let mut total = EfeTerms { risk: 0.0, ambiguity: 0.0 };
            for (n, t) in &idle {
                let t = match &replaced {
                    Some((node, terms)) if node == *n => terms,
                    _ => t,
                };
                total.risk += t.risk;
                total.ambiguity += t.ambiguity;
            }
            let cost = cfg.action_costs.get(&action.kind).copied().unwrap_or(0.0);
            candidates.push(EfeEntry::new(action, total, cost));
        }
        let selected = select_action(&candidates, cfg.epsilon_g).map_err(stage("selection"))?;
        let chosen = if cfg.force_do_nothing {
            Action::do_nothing()
        } else {
            selected.action.clone()
        };

        let outcome = apply_intervention(state, &chosen, derive_seed(self.seed, "intervention", round))
            .map_err(stage("intervention"))?;

        escalation.record(&chosen);
        let decision = DecisionRecord {
            round,
            candidates,
            chosen: chosen.id.clone(),
            effective: outcome.effective,
            rejected: outcome.rejected.clone(),
            beliefs,
            predicted: predictions.remove(&chosen.id).unwrap_or_default(),
        };
        delta.advance(&mut self.anchors);
        self.evidence = evidence;
        self.graph = Some(graph.clone());
        self.escalation = escalation;
        self.rounds += 1;
        Ok(RoundOutput {
            decision,
            graph,
            climb,
            features,
            inferences: inferences.into_values().collect(),
            outcome,
        })
    }
}
