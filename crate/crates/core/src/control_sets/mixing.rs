use serde::{Deserialize, Serialize};

use super::equilibrium::EquilibriumTable;
use super::ControlSetError;
use crate::cocycle::{IntegratorConfig, Solver, SystemDef};
use crate::driving::{torus_distance, DrivingFlowSpec, DrivingPoint};
use crate::signals::ControlSignal;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingConfig {
    /// Steering time `T`.
    pub t: f64,
    /// `y₁` must lie within `eps` of `α(ω₁)`.
    pub eps: f64,
    /// Coasting times are searched in `[s_min, s_max]`.
    pub s_min: f64,
    pub s_max: f64,
    /// Required `|φ(Tₙ, ω₁, y₁, u) - y₂|`.
    pub hit_tol: f64,
}

impl MixingConfig {
    pub fn new(t: f64, eps: f64) -> Self {
        MixingConfig { t, eps, s_min: 0.0, s_max: 1e4, hit_tol: 1e-6 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingPhase {
    pub name: String,
    pub start: f64,
    pub duration: f64,
    pub control: Vec<f64>,
    pub start_state: Vec<f64>,
    pub end_state: Vec<f64>,
    /// Distance of the end state from the phase's target.
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingTranscript {
    pub omega1: DrivingPoint,
    pub y1: Vec<f64>,
    pub omega2: DrivingPoint,
    pub y2: Vec<f64>,
    pub phases: Vec<MixingPhase>,
    pub coast_time: f64,
    /// `Tₙ = Sₙ + 2T`.
    pub total_time: f64,
    pub control: ControlSignal,
    /// `|φ(Tₙ, ω₁, y₁, u) - y₂|` from one pass over the concatenated control.
    pub hit_error: f64,
    /// `d(ω₁·Tₙ, ω₂)`.
    pub driving_error: f64,
}

/// First `S ∈ [s_min, s_max]` on a grid fine enough to see every
/// `δ/2`-approach with `d(from·S, to) < δ`. On failure returns the best
/// distance seen.
pub fn coasting_time(
    driving: &DrivingFlowSpec,
    from: &DrivingPoint,
    to: &DrivingPoint,
    delta: f64,
    s_min: f64,
    s_max: f64,
) -> Result<(f64, f64), f64> {
    let speed = driving.max_speed();
    let step = if speed > 0.0 { 0.5 * delta / speed } else { f64::INFINITY };
    let mut best = f64::INFINITY;
    let mut w = vec![0.0; from.dim()];
    let mut k = 0u64;
    loop {
        let s = s_min + k as f64 * step;
        if s > s_max {
            return Err(best);
        }
        driving.advance_into(from.coords(), s, &mut w);
        let d = torus_distance(&w, to.coords());
        if d < delta {
            return Ok((s, d));
        }
        best = best.min(d);
        k += 1;
    }
}

/// Constant control `c ∈ U` with `φ(t, ω, x, c) = target`, by bisection on
/// the scalar control value.
fn steer(
    solver: &Solver,
    omega: &DrivingPoint,
    x: &[f64],
    target: f64,
    t: f64,
    (lo, hi): (f64, f64),
) -> Result<(f64, Vec<f64>), ControlSetError> {
    let end = |c: f64| -> Result<Vec<f64>, ControlSetError> {
        Ok(solver.phi(t, omega.coords(), x, &ControlSignal::constant(vec![c]))?)
    };
    let (ya, yb) = (end(lo)?, end(hi)?);
    let (ga, gb) = (ya[0] - target, yb[0] - target);
    if ga == 0.0 {
        return Ok((lo, ya));
    }
    if gb == 0.0 {
        return Ok((hi, yb));
    }
    if ga.signum() == gb.signum() {
        return Err(ControlSetError::NoBracket { target, low: ya[0].min(yb[0]), high: ya[0].max(yb[0]) });
    }
    let (mut a, mut b, mut fa) = (lo, hi, ga);
    let mut best = if ga.abs() < gb.abs() { (lo, ya) } else { (hi, yb) };
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let y = end(m)?;
        let g = y[0] - target;
        if g.abs() < (best.1[0] - target).abs() {
            best = (m, y);
        }
        if g == 0.0 || b - a < 1e-15 {
            break;
        }
        if g.signum() == fa.signum() {
            a = m;
            fa = g;
        } else {
            b = m;
        }
    }
    Ok(best)
}

/// Steers `(ω₁, y₁)` to `y₂` exactly, arriving with the driving within `δ`
/// of `ω₂`: reach `α(ω₁·T)` in time `T`, coast with `u ≡ 0` until the
/// driving is within `δ` of `ω₂·(-T)`, then hit `y₂` in time `T`.
///
/// Scalar state and a single control channel only.
#[allow(clippy::too_many_arguments)]
pub fn mixing_transfer(
    omega1: &DrivingPoint,
    y1: &[f64],
    omega2: &DrivingPoint,
    y2: &[f64],
    eps0: f64,
    table: &EquilibriumTable,
    sys: &SystemDef,
    cfg: &IntegratorConfig,
    delta: f64,
    config: &MixingConfig,
) -> Result<MixingTranscript, ControlSetError> {
    if sys.state_dim() != 1 || sys.control_dim() != 1 {
        return Err(ControlSetError::Unsupported("mixing transfer needs one state and one control channel".into()));
    }
    if !(config.t > 0.0 && delta > 0.0 && eps0 > 0.0 && eps0 <= config.eps) {
        return Err(ControlSetError::BadParams("need T > 0, delta > 0 and 0 < eps0 <= eps".into()));
    }
    let t = config.t;
    let driving = sys.driving();
    let a1 = table.alpha_at(sys, cfg, omega1)?;
    let a2 = table.alpha_at(sys, cfg, omega2)?;
    if (y1[0] - a1[0]).abs() >= config.eps || (y2[0] - a2[0]).abs() >= eps0 {
        return Err(ControlSetError::BadParams(format!(
            "endpoints too far from the equilibrium: |y1 - a| = {}, |y2 - a| = {}",
            (y1[0] - a1[0]).abs(),
            (y2[0] - a2[0]).abs()
        )));
    }
    let range = sys.control_range().bounds()[0];
    let solver = Solver::new(sys, cfg.clone());

    let w1 = driving.advance(omega1, t);
    let target1 = table.alpha_at(sys, cfg, &w1)?;
    let (c1, x1) = steer(&solver, omega1, y1, target1[0], t, range)?;

    let goal = driving.advance(omega2, -t);
    let (s, _) = coasting_time(driving, &w1, &goal, delta, config.s_min, config.s_max)
        .map_err(|best| ControlSetError::NoCoastingTime { s_max: config.s_max, best })?;
    let z = solver.phi(s, w1.coords(), &x1, &ControlSignal::zero(1))?;
    let w2 = driving.advance(&w1, s);
    let behind = table.alpha_at(sys, cfg, &goal)?;
    let (c2, x2) = steer(&solver, &w2, &z, y2[0], t, range)?;

    let total = s + 2.0 * t;
    let control = ControlSignal::constant(vec![c1])
        .concatenate(&ControlSignal::zero(1), t)
        .concatenate(&ControlSignal::constant(vec![c2]), t + s);
    let end = solver.phi(total, omega1.coords(), y1, &control)?;
    let hit_error = (end[0] - y2[0]).abs();
    let driving_error = torus_distance(driving.advance(omega1, total).coords(), omega2.coords());
    let phases = vec![
        MixingPhase {
            name: "steer-to-equilibrium".into(),
            start: 0.0,
            duration: t,
            control: vec![c1],
            start_state: y1.to_vec(),
            end_state: x1.clone(),
            error: (x1[0] - target1[0]).abs(),
        },
        MixingPhase {
            name: "coast".into(),
            start: t,
            duration: s,
            control: vec![0.0],
            start_state: x1,
            end_state: z.clone(),
            error: (z[0] - behind[0]).abs(),
        },
        MixingPhase {
            name: "steer-to-target".into(),
            start: t + s,
            duration: t,
            control: vec![c2],
            start_state: z,
            end_state: x2.clone(),
            error: (x2[0] - y2[0]).abs(),
        },
    ];
    let transcript = MixingTranscript {
        omega1: omega1.clone(),
        y1: y1.to_vec(),
        omega2: omega2.clone(),
        y2: y2.to_vec(),
        phases,
        coast_time: s,
        total_time: total,
        control,
        hit_error,
        driving_error,
    };
    if !(hit_error < config.hit_tol) || !(driving_error < delta + eps0) {
        return Err(ControlSetError::MissedTarget { hit_error, driving_error });
    }
    Ok(transcript)
}
