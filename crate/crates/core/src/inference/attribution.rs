use serde::{Deserialize, Serialize};

use super::exact::{exact_posterior, MAX_LATENT_BITS};
use super::mean_field::{minimize_free_energy, MeanFieldOptions};
use super::problem::InferenceProblem;
use super::InferenceError;
use crate::logs::VarKind;

/// Gap below which neither side is preferred.
pub const ATTRIBUTION_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Hardware,
    Software,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub hw_score: f64,
    pub sw_score: f64,
    pub label: Origin,
}

fn active_given(problem: &InferenceProblem<'_>, f: usize) -> Result<f64, InferenceError> {
    let q = if problem.latent_bits() <= MAX_LATENT_BITS {
        exact_posterior(problem)?.belief
    } else {
        minimize_free_energy(problem, None, &MeanFieldOptions::default())?.0
    };
    q.active(f)
        .ok_or_else(|| InferenceError::NotLatent(problem.graph.variables[f].id.clone()))
}

/// Posterior of `f` being active with only hardware evidence clamped, and
/// with only software evidence clamped.
pub fn attribute_origin(problem: &InferenceProblem<'_>, f: usize) -> Result<Attribution, InferenceError> {
    if f >= problem.graph.len() {
        return Err(InferenceError::UnknownVariable(format!("index {f}")));
    }
    if !problem.is_latent(f) {
        return Err(InferenceError::NotLatent(problem.graph.variables[f].id.clone()));
    }
    let hw_score = active_given(&problem.restricted_to(VarKind::HwContext), f)?;
    let sw_score = active_given(&problem.restricted_to(VarKind::SwContext), f)?;
    let label = if (hw_score - sw_score).abs() < ATTRIBUTION_MARGIN {
        Origin::Undetermined
    } else if hw_score > sw_score {
        Origin::Hardware
    } else {
        Origin::Software
    };
    Ok(Attribution {
        hw_score,
        sw_score,
        label,
    })
}
