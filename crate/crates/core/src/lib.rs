//! Liability assignment for cascading cancellations on directed acyclic
//! networks.
//!
//! A shock at the source of a [`Dag`] propagates down one source-to-sink
//! [`Path`] chosen edge by edge by the agents it reaches. A liability rule
//! splits the realized loss among agents; this crate evaluates such rules,
//! computes Shapley-based fixed weights, solves the induced sequential game
//! and checks rule properties on random instances.

pub mod axioms;
pub mod fixtures;
pub mod game;
pub mod graph;
pub mod io;
pub mod rules;
pub mod sim;
pub mod weights;

pub use graph::{
    count_paths, efficient_paths, enumerate_paths, reachable_subgraph, validate, Dag, Digraph,
    EfficientPaths, GraphError, LossFunction, NodeId, Path, ValidationReport,
};
pub use rules::{make_rule, LiabilityVector, Rule, RuleError, RuleSpec, WeightVector};
