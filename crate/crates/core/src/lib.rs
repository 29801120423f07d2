//! Expander decompositions, congestion-approximator hierarchies, one-sided
//! fair cuts and approximate maximum flow on undirected capacitated graphs.
//!
//! The crate is organised bottom-up:
//!
//! * [`graph`] holds the data model (graphs, flows, partitions, cuts).
//! * [`paths`] decomposes flows into weighted paths and manipulates them.
//! * [`exact`] has exact max flow and brute-force checkers used as oracles.
//! * [`cut_matching`] runs the warm-started cut-matching game with deletions.
//! * [`grafting`] upgrades its output into a final decomposition.
//! * [`fair_cut`] computes one-sided fair cuts against a laminar family.
//! * [`sherman`] has the almost-route solver, the flow-based matching
//!   oracle and the approximate max-flow entry point.
//! * [`hierarchy`] builds levels bottom-up and routes demands through them.
//! * [`report`] reads the text input format and writes JSON reports.

pub mod cut_matching;
pub mod error;
pub mod exact;
pub mod fair_cut;
pub mod generators;
pub mod grafting;
pub mod graph;
pub mod hierarchy;
pub mod laminar;
pub mod paths;
pub mod report;
pub mod sherman;

pub use error::{Error, Result};
pub use graph::{CapGraph, FlowAssignment, VertexPartition};
