//! Fault inference over a fitted causal fault graph.

mod attribution;
mod exact;
mod free_energy;
mod mean_field;
mod problem;

use std::fmt::Write as _;

use thiserror::Error;

pub use attribution::{attribute_origin, Attribution, Origin, ATTRIBUTION_MARGIN};
pub use exact::{blanket_posterior, exact_posterior, joint_free_energy, ExactPosterior, MAX_LATENT_BITS};
pub use free_energy::free_energy;
pub use mean_field::{minimize_free_energy, InferenceStats, MeanFieldOptions};
pub use problem::{Belief, InferenceProblem};

pub(crate) use free_energy::free_energy_dense;
pub(crate) use mean_field::{latent_order, Frozen, Updater};

/// Q(f active) above which a fault counts as detected in reports.
pub const DETECTION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("evidence has zero probability under the model (at `{0}`)")]
    ModelMisfit(String),
    #[error("latent space of {bits:.1} binary variables is too large to enumerate")]
    TooLarge { bits: f64 },
    #[error("blanket assignment is missing {0:?}")]
    IncompleteBlanket(Vec<String>),
    #[error("value {value} is out of range for `{variable}`")]
    InvalidEvidence { variable: String, value: u8 },
    #[error("unknown variable {0}")]
    UnknownVariable(String),
    #[error("belief has no marginal for `{0}`")]
    MissingMarginal(String),
    #[error("`{0}` is observed, not latent")]
    NotLatent(String),
    #[error("invalid option: {0}")]
    InvalidOption(String),
}

/// Tab-separated belief dump: `variable  marginal  F  sweeps  converged`.
pub fn belief_dump(problem: &InferenceProblem<'_>, belief: &Belief) -> String {
    let mut out = String::new();
    for (&v, m) in &belief.marginals {
        let cells: Vec<String> = m.iter().map(|p| format!("{p:?}")).collect();
        let _ = writeln!(
            out,
            "{}\t{}\t{:?}\t{}\t{}",
            problem.graph.variables[v].id,
            cells.join(","),
            belief.free_energy,
            belief.sweeps,
            belief.converged
        );
    }
    out
}
