//! Set-oriented computation of chain control sets, control sets and
//! pullback equilibria for control-affine systems driven by torus flows.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod driving;
pub mod expr;
pub mod signals;
pub mod cocycle;
pub mod cover_graph;
pub mod control_sets;
pub mod lift;
pub mod scenarios;

pub use cocycle::{BoxDomain, ExtendedState, IntegrationError, IntegratorConfig, Solver, SystemDef};
pub use control_sets::{ControlSetApprox, ControlSetError, EquilibriumTable};
pub use cover_graph::{BoxCover, ChainGraph, ChainParams, ChainSetApprox, GraphError};
pub use driving::{DrivingFlowSpec, DrivingGrid, DrivingPoint};
pub use lift::{LiftError, LiftedSample, PhiChain};
pub use scenarios::Scenario;
pub use signals::{ControlRange, ControlSignal, MetricBasis};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
