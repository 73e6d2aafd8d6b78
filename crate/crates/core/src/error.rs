//! Crate-level error and its mapping to process exit codes.

use thiserror::Error;

use crate::coded::CodedError;
use crate::experiments::ExperimentError;
use crate::game::GameError;
use crate::mechanism::MechanismError;
use crate::numerics::NumericsError;
use crate::runtime::RuntimeError;
use crate::worker::ModelError;

/// Broad failure class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input or configuration.
    Config,
    /// A root finder or linear solve failed.
    Numerical,
    /// The instance admits no valid mechanism or decode.
    Infeasible,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Numerical => 3,
            ErrorKind::Infeasible => 4,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Coded(#[from] CodedError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
}

fn numerics_kind(_: &NumericsError) -> ErrorKind {
    ErrorKind::Numerical
}

fn model_kind(e: &ModelError) -> ErrorKind {
    match e {
        ModelError::Numerics(n) => numerics_kind(n),
        _ => ErrorKind::Config,
    }
}

fn runtime_kind(e: &RuntimeError) -> ErrorKind {
    match e {
        RuntimeError::Model(m) => model_kind(m),
        RuntimeError::NoWorkers | RuntimeError::InfeasibleAssignment { .. } => {
            ErrorKind::Infeasible
        }
        _ => ErrorKind::Config,
    }
}

fn mechanism_kind(e: &MechanismError) -> ErrorKind {
    match e {
        MechanismError::Infeasible(_) => ErrorKind::Infeasible,
        MechanismError::Runtime(r) => runtime_kind(r),
        MechanismError::Model(m) => model_kind(m),
        MechanismError::Numerics(n) => numerics_kind(n),
        _ => ErrorKind::Config,
    }
}

fn game_kind(e: &GameError) -> ErrorKind {
    match e {
        GameError::Mechanism(m) => mechanism_kind(m),
        GameError::Model(m) => model_kind(m),
        GameError::MisreportNotAllowed { .. } => ErrorKind::Config,
    }
}

fn coded_kind(e: &CodedError) -> ErrorKind {
    match e {
        CodedError::IllConditioned { .. } => ErrorKind::Numerical,
        CodedError::InsufficientWorkers { .. } => ErrorKind::Infeasible,
        CodedError::Game(g) => game_kind(g),
        CodedError::Mechanism(m) => mechanism_kind(m),
        CodedError::Runtime(r) => runtime_kind(r),
        CodedError::Model(m) => model_kind(m),
        _ => ErrorKind::Config,
    }
}

fn experiment_kind(e: &ExperimentError) -> ErrorKind {
    match e {
        ExperimentError::Model(m) => model_kind(m),
        ExperimentError::Mechanism(m) => mechanism_kind(m),
        ExperimentError::Game(g) => game_kind(g),
        ExperimentError::Runtime(r) => runtime_kind(r),
        _ => ErrorKind::Config,
    }
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Numerics(e) => numerics_kind(e),
            Error::Model(e) => model_kind(e),
            Error::Runtime(e) => runtime_kind(e),
            Error::Mechanism(e) => mechanism_kind(e),
            Error::Game(e) => game_kind(e),
            Error::Coded(e) => coded_kind(e),
            Error::Experiment(e) => experiment_kind(e),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind().exit_code()
    }
}
