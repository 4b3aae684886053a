//! Exact controllability without jumps: reachable and controllable sets at
//! a fixed time, equilibria of the uncontrolled system, the control set
//! around such an equilibrium and exact transfers between its points.

mod control_set;
mod equilibrium;
mod mixing;
mod reach;

use thiserror::Error;

pub use control_set::{
    control_set_around, control_set_in, exact_graph, verify_no_return, ControlSetApprox, NoReturnConfig,
    NoReturnReport,
};
pub use equilibrium::{
    check_exact_condition, pullback_equilibrium, CellCondition, EquilibriumTable, ExactConditionReport,
    PullbackConfig, RESIDUAL_TIMES,
};
pub use mixing::{coasting_time, mixing_transfer, MixingConfig, MixingPhase, MixingTranscript};
pub use reach::{control_set_to, reach_set, ReachInterval, ReachMode, ReachShape};

use crate::cocycle::IntegrationError;
use crate::cover_graph::GraphError;
use crate::signals::SignalError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlSetError {
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("uncontrolled trajectories from the boundary of Q do not end in Q (cell {cell})")]
    NotDissipative { cell: usize },
    #[error("pullback did not converge: horizon {horizon}, change {change}, residual {residual}")]
    NoConvergence { horizon: f64, change: f64, residual: f64 },
    #[error("equilibrium of cell {cell} lies outside Q")]
    SeedOutside { cell: usize },
    #[error("no constant control reaches {target}: endpoints span [{low}, {high}]")]
    NoBracket { target: f64, low: f64, high: f64 },
    #[error("no coasting time up to {s_max} brings the driving within range (best {best})")]
    NoCoastingTime { s_max: f64, best: f64 },
    #[error("transfer missed: state error {hit_error}, driving error {driving_error}")]
    MissedTarget { hit_error: f64, driving_error: f64 },
}
