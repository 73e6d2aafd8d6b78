//! Figure-reproduction sweeps over the total worker count `N`.
//!
//! Each sweep point splits `N` across the types by largest remainder of the
//! configured weights, solves the relevant mechanisms and records one row.
//! `fig4`, `fig5`, `fig6` and `custom` are closed-form; `fig7` samples type
//! realizations from per-point seeded streams.

use std::path::PathBuf;

use thiserror::Error;

use crate::game::GameError;
use crate::mechanism::MechanismError;
use crate::runtime::RuntimeError;
use crate::worker::ModelError;

pub mod config;
pub mod figures;
pub mod table;

pub use config::{load_config, parse_config, ExperimentName, ExperimentSpec};
pub use figures::{run, run_custom, run_fig4, run_fig5, run_fig6, run_fig7};
pub use table::{spec_from_csv, Cell, ResultTable};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error("line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("{}: {msg}", path.display())]
    Io { path: PathBuf, msg: String },
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
}
