//! Exact dynamic user equilibrium with route and departure-time choice on
//! many-to-one bottleneck networks.
//!
//! The pipeline solves a cost-determination LP pair to obtain candidate
//! queueing delays and earliest travel times, then recovers (or disproves)
//! a flow pattern consistent with them, and verifies the full equilibrium
//! conditions. The dynamic system optimum and its queue-eliminating prices
//! come from the same LP.

pub mod cost_step;
pub mod dso;
pub mod error;
pub mod flow_step;
pub mod instance;
pub mod lp;
pub mod network;
pub mod options;
pub mod timegrid;
pub mod verify;

pub use cost_step::{check_cost_kkt, solve_cost_step, CostKkt, CostStep};
pub use dso::{compare_dso_due, kappa_search, pareto_report, solve_dso, DsoComparison, DsoSolution, KappaSearch, ParetoReport};
pub use error::{Error, Result};
pub use flow_step::{run_flow_step, FlowRoute, FlowStep, FlowStepOptions, GqrpVerdict};
pub use instance::{CostPattern, FlowPattern, Instance};
pub use lp::{LpSolver, RevisedSimplex};
pub use network::{Network, ScalingMode, ScheduleCost};
pub use options::SolveOptions;
pub use timegrid::{make_grid, SeriesSet, TimeGrid, TimeSeries};
pub use verify::{due_qp_objective, due_residuals, eulerian_reconstruct, DueObjective, DueSolution, Provenance, ResidualReport};
