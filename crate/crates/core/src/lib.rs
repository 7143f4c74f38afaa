//! Structural analysis and minimum-cost design of networked state
//! estimators for large-scale linear systems.
//!
//! A system is described by the zero pattern of its state matrix. The
//! crate decides structural and networked observability, chooses which
//! agent measures which state, and builds the cheapest communication
//! network that lets every agent estimate the full state.

pub mod digraph;
pub mod dot;
pub mod error;
pub mod io;
mod matching;
pub mod mccn;
pub mod mcss;
pub mod observability;
pub mod solver;
pub mod sysmodel;

pub use digraph::{parent_sccs, scc_decompose, Digraph, SccDecomposition};
pub use error::{Error, Result};
pub use mccn::{minimum_spanning_tree, CommunicationCosts, NetworkDesign};
pub use mcss::{hungarian, reduce_costs, Assignment, MeasurementCosts, ReducedCosts};
pub use observability::{
    is_networked_observable, is_structurally_observable, networked_observability, CheckMethod,
    NetworkedReport, ObservabilityReport,
};
pub use solver::{solve_mcne, verify_solution, DesignSolution, SolveOptions};
pub use sysmodel::{ContinuousSystem, StructuredMatrix};
