//! Finite-time consensus in higher dimensions.
//!
//! Ratio (push-sum) and row-stochastic averaging on directed graphs, a
//! distributed convex hull consensus protocol, and stopping criteria that
//! let every node halt at the same iteration with a guaranteed accuracy.
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar for common use.

pub mod applications;
pub mod consensus;
pub mod graph;
pub mod hull;
pub mod linalg;
pub mod lp;
pub mod pointset;
pub mod scalar;
pub mod termination;
pub mod weights;

pub use consensus::{
    consensus_limit, make_process, ratio_step, row_step, ConsensusError, ConsensusProcess, Engine,
    RatioProcess, RatioState, RowProcess, RowState,
};
pub use graph::{DiGraph, GraphError, GraphModel, GraphRecord};
pub use hull::{extreme_points, hull_membership, HullError, HullNodeState};
pub use pointset::{PointSet, PointSetError};
pub use scalar::{Norm, Scalar};
pub use termination::{
    run_algorithm1, run_radius_termination, StopConfig, StopOutcome, StoppingMethod, TerminationError,
    TerminationTrace,
};
pub use weights::{StochasticMatrix, WeightError, WeightKind};

pub type RatioStateF64 = RatioState<f64>;
pub type RatioStateF32 = RatioState<f32>;
pub type RowStateF64 = RowState<f64>;
pub type RowStateF32 = RowState<f32>;
pub type PointSetF64 = PointSet<f64>;
pub type PointSetF32 = PointSet<f32>;
pub type StochasticMatrixF64 = StochasticMatrix<f64>;
pub type StochasticMatrixF32 = StochasticMatrix<f32>;
pub type StopConfigF64 = StopConfig<f64>;
pub type StopConfigF32 = StopConfig<f32>;
pub type TerminationTraceF64 = TerminationTrace<f64>;
pub type TerminationTraceF32 = TerminationTrace<f32>;
