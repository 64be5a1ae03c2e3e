//! Causal fault-graph learning: BDeu hill climbing with a structural prior,
//! CPT fitting and Markov blankets.

mod fit;
mod graph;
mod persist;
mod score;
mod search;

use thiserror::Error;

pub use fit::fit_cpts;
pub use graph::{CausalFaultGraph, Cpt, Dag, Variable};
pub use persist::{parse_edge_list, parse_graph, to_cpt_dump, to_edge_list};
pub use score::{bde_score, family_bdeu, score_structure, structural_prior, Columns, StructureScore};
pub use search::{hill_climb, ClimbOptions, ClimbResult, Move, MoveKind};

#[derive(Debug, Error)]
pub enum CfgError {
    #[error("unknown variable {0}")]
    UnknownVariable(String),
    #[error("variable sets differ: {0}")]
    VariableMismatch(String),
    #[error("edge {from}->{to} would create a cycle")]
    Cycle { from: usize, to: usize },
    #[error("graph is cyclic")]
    Cyclic,
    #[error("degenerate variable {0} cannot take part in an edge")]
    Degenerate(usize),
    #[error("table for `{0}` is not a distribution")]
    InvalidTable(String),
    #[error("invalid option: {0}")]
    InvalidOption(String),
    #[error("malformed graph text: {0}")]
    Parse(String),
}

/// One learning round: hill climb from the previous graph, then fit tables.
pub fn learn(
    variables: Vec<Variable>,
    data: &Columns,
    previous: Option<&Dag>,
    opts: &ClimbOptions,
    round: u64,
) -> Result<(CausalFaultGraph, ClimbResult), CfgError> {
    let climb = hill_climb(data, previous, opts)?;
    let graph = fit_cpts(variables, climb.dag.clone(), data, opts.ess, round)?;
    Ok((graph, climb))
}
