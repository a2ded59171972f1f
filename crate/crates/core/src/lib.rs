//! Right-hand-side (resource share) decomposition of block-separable convex
//! programs with exact non-smooth penalties.
//!
//! The coupled problem `min sum_i f_i(x_i)` s.t. `sum_i h_i(x_i) <= b` is
//! reduced to a convex, non-smooth master problem over share allocations
//! `u in U = { u : sum_i u_i = b }`. Every block is evaluated independently
//! through a bounded dual LP that also yields a subgradient, and the master
//! problem is minimized with projected subgradient methods.
//!
//! Modules:
//! - [`problem`]: data model, the share set and its projections
//! - [`lp`]: dense bounded-variable simplex, the reference solver
//! - [`penalty`]: master function, block oracle, penalty calibration
//! - [`subgradient`]: step-size rules and the projected/averaged solvers
//! - [`testbed`]: Shor's problem and the decomposable LP generator
//! - [`experiment`]: drivers behind the command-line tool

pub mod error;
pub mod experiment;
pub mod lp;
pub mod penalty;
pub mod problem;
pub mod subgradient;
pub mod testbed;

pub use error::{Error, Result};
pub use lp::{solve_full_reference, solve_lp, LpInstance, LpSolution, LpStatus, ReferenceSolution, Relation};
pub use penalty::{
    calibrate_penalty, eval_master, eval_mu_block, optimal_shares, recover_primal, subgradient_norm_bound,
    CalibrationResult, MasterEvaluation,
};
pub use problem::{
    project_direction_onto_u0, project_onto_u, BlockPoint, DecomposableLp, LpBlock, PenaltyBound, ShareAllocation,
};
pub use subgradient::{run_dasg, run_subgradient, Method, RunTrace, SolverConfig, StepSchedule, StopStatus};
pub use testbed::{generate_declp, initial_allocation, shor_eval, GeneratorSpec};
