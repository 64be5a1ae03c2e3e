//! Causal fault-graph learning, mean-field fault inference and
//! expected-free-energy self-healing for a simulated distributed computing
//! continuum.
//!
//! Modules follow the agent's loop:
//!
//! * [`sim`]: seeded round-based simulator of the continuum (nodes, tasks,
//!   checkpoints, fault injection) that produces logs and absorbs actions.
//! * [`logs`]: checkpoint-anchored incremental collection and discretisation
//!   of logs into a [`FeatureMatrix`].
//! * [`cfg`]: BDeu hill climbing with a structural prior, table fitting and
//!   Markov blankets.
//! * [`inference`]: variational free energy, mean-field coordinate descent,
//!   exact enumeration and hardware/software attribution.
//! * [`planner`]: action enumeration, interventional belief prediction,
//!   expected free energy and the closed agent loop.
//! * [`harness`]: experiment runner, metrics, plots and replay.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod action;
pub mod cfg;
pub mod harness;
pub mod inference;
pub mod logs;
pub mod planner;
pub mod seed;
pub mod sim;

pub use action::{Action, ActionKind, Target};
pub use cfg::{CausalFaultGraph, Cpt, Dag, StructureScore, Variable};
pub use inference::{Belief, InferenceProblem};
pub use logs::{BinSpec, EvidenceBatch, FeatureMatrix, LogDelta, VarKind};
pub use planner::{AgentConfig, AgentState, EfeReport, PreferenceModel};
pub use sim::{ContinuumState, GroundTruthNet, LogEntry, NodeId, ScenarioConfig, TaskId};
