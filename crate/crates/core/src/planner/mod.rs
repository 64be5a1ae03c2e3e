//! Active-inference healing: score candidate actions by expected free
//! energy and execute the minimiser.

mod agent;
mod catalog;
mod efe;
mod preferences;

use thiserror::Error;

use crate::inference::InferenceError;

pub use agent::{AgentConfig, AgentError, AgentState, DecisionRecord, NodeInference, RoundOutput};
pub use catalog::{enumerate_actions, Catalog, CatalogEntry, Escalation, NodeBeliefs, ENUMERATION_THRESHOLD};
pub use efe::{
    expected_free_energy, predict_beliefs, predictive_features, select_action, EfeEntry, EfeReport, EfeTerms,
    FeaturePrediction, EPSILON_G,
};
pub use preferences::PreferenceModel;

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("empty action report")]
    EmptyReport,
    #[error("action report lacks do-nothing")]
    MissingDoNothing,
    #[error("preference for `{0}` must be strictly positive and sum to 1")]
    InvalidPreference(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("graph is cyclic")]
    Cyclic,
    #[error(transparent)]
    Inference(#[from] InferenceError),
}
