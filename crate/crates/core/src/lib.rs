//! Incentive mechanisms and runtime models for coded distributed computation.
//!
//! A platform recruits heterogeneous workers to run a coded matrix-vector
//! task. This crate models the workers ([`worker`]), the load assignment and
//! expected runtime ([`runtime`]), the platform's optimal offers under
//! complete and incomplete information ([`mechanism`]), the workers' best
//! responses and incentive checks ([`game`]), concrete MDS coding
//! ([`coded`]) and the sweeps that regenerate the figures
//! ([`experiments`]).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coded;
pub mod error;
pub mod experiments;
pub mod game;
pub mod mechanism;
pub mod numerics;
pub mod rng;
pub mod runtime;
pub mod worker;

pub use error::{Error, ErrorKind};
pub use game::{best_response, verify_ir_ic, worker_payoff, ComplianceReport, WorkerDecision};
pub use mechanism::{
    brute_force_complete, platform_cost, solve_complete, solve_cost_only, solve_incomplete,
    Mechanism, PlatformConfig, Scenario,
};
pub use numerics::Tolerance;
pub use runtime::{LoadAssignment, LoadScheme, RuntimeEstimate};
pub use worker::{build_population, Population, TypeId, WorkerType};
