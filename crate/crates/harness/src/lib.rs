//! Deterministic experiment runner for finite-time consensus.
//!
//! An [`ExperimentConfig`] fixes every input, so the same config always
//! produces the same bytes. Summaries are built by re-checking the recorded
//! states rather than trusting the values reported by the protocol.

pub mod apps;
pub mod config;
pub mod experiment;

use ftc_core::applications::lse::LseError;
use ftc_core::{ConsensusError, GraphError, HullError, TerminationError};
use thiserror::Error;

pub use config::{ExperimentConfig, Stopping, Topology};
pub use experiment::{compare_criteria, run_experiment, Comparison, Report, RunStatus, Summary};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("input data error: {0}")]
    Data(String),
    #[error("did not halt within {k_max} iterations")]
    NotHalted { k_max: usize },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// Process exit code: 1 config or input, 2 not halted, 3 invariant.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Data(_) | HarnessError::Io(_) => 1,
            HarnessError::NotHalted { .. } => 2,
            HarnessError::Invariant(_) => 3,
        }
    }
}

impl From<GraphError> for HarnessError {
    fn from(e: GraphError) -> Self {
        HarnessError::Config(e.to_string())
    }
}

impl From<ConsensusError> for HarnessError {
    fn from(e: ConsensusError) -> Self {
        HarnessError::Invariant(e.to_string())
    }
}

impl From<HullError> for HarnessError {
    fn from(e: HullError) -> Self {
        HarnessError::Invariant(e.to_string())
    }
}

impl From<ftc_core::PointSetError> for HarnessError {
    fn from(e: ftc_core::PointSetError) -> Self {
        HarnessError::Invariant(e.to_string())
    }
}

impl From<TerminationError> for HarnessError {
    fn from(e: TerminationError) -> Self {
        match e {
            TerminationError::InvalidRho | TerminationError::BoundBelowDiameter { .. } => {
                HarnessError::Config(e.to_string())
            }
            TerminationError::NotHalted { k_max, .. } => HarnessError::NotHalted { k_max },
            other => HarnessError::Invariant(other.to_string()),
        }
    }
}

impl From<LseError> for HarnessError {
    fn from(e: LseError) -> Self {
        match e {
            LseError::Singular | LseError::IllConditioned(_) | LseError::EmptyData | LseError::Dimension(_) => {
                HarnessError::Data(e.to_string())
            }
            other => HarnessError::Invariant(other.to_string()),
        }
    }
}
