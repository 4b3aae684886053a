//! Control-affine systems over a driving flow and their numerical cocycle.
//!
//! `φ(t, ω, x, u)` solves `ẋ(s) = f₀(ω·s, x) + Σ uᵢ(s) fᵢ(ω·s, x)` from
//! `x(0) = x`; negative `t` runs the same field backwards in time.

mod integrator;
mod system;

pub use integrator::{
    cocycle_residual, flow_step, solve_phi, solve_psi, ExtendedState, IntegrationError, IntegratorConfig,
    Method, Solver,
};
pub use system::{BoxDomain, SystemDef, SystemError, MAX_SLOTS};
