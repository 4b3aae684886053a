use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ControlSetError;
use crate::cocycle::{IntegrationError, IntegratorConfig, Solver, SystemDef};
use crate::driving::DrivingPoint;
use crate::signals::{random_signal, sample_controls, ControlSignal};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum ReachMode {
    /// Extremal constant controls at the vertices of `U`. Exact for scalar
    /// systems whose control fields keep a constant sign.
    ExactScalar,
    /// Constant controls on a grid plus random piecewise-constant ones.
    Sampled { levels: usize, refinements: usize, pieces: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ReachShape {
    /// `[lo, hi]`; an infinite end means the extremal solution escaped the
    /// blow-up bound, so every state beyond is included.
    Interval { lo: f64, hi: f64 },
    Cloud { points: Vec<Vec<f64>>, escaped: usize },
}

/// `R_T(ω, x)` (forward) or `C_T(ω, x)` (backward).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReachInterval {
    pub omega: DrivingPoint,
    pub base: Vec<f64>,
    pub horizon: f64,
    pub shape: ReachShape,
}

impl ReachInterval {
    pub fn interval(&self) -> Option<(f64, f64)> {
        match self.shape {
            ReachShape::Interval { lo, hi } => Some((lo, hi)),
            ReachShape::Cloud { .. } => None,
        }
    }

    /// Largest `r` with `[y - r, y + r] ⊂ [lo, hi]`; negative when `y` is outside.
    pub fn margin(&self, y: f64) -> Option<f64> {
        self.interval().map(|(lo, hi)| (y - lo).min(hi - y))
    }

    pub fn contains(&self, y: f64) -> bool {
        self.interval().is_some_and(|(lo, hi)| lo <= y && y <= hi)
    }
}

/// Constant controls at every vertex of `U`.
pub(crate) fn vertex_controls(sys: &SystemDef) -> Vec<ControlSignal> {
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for &(lo, hi) in sys.control_range().bounds() {
        let ends: Vec<f64> = if lo == hi { vec![lo] } else { vec![lo, hi] };
        out = out
            .into_iter()
            .flat_map(|p| {
                ends.iter().map(move |&e| {
                    let mut q = p.clone();
                    q.push(e);
                    q
                })
            })
            .collect();
    }
    out.into_iter().map(ControlSignal::constant).collect()
}

/// Endpoint at signed time `t`; `Ok(None)` with the sign of the escape when
/// the solution leaves the blow-up bound.
fn endpoint(solver: &Solver, t: f64, omega: &DrivingPoint, x: &[f64], u: &ControlSignal) -> Result<Result<Vec<f64>, f64>, ControlSetError> {
    let mut last = x.to_vec();
    let (mut states, err) = solver.run_partial(omega.coords(), x, u, &[t], |_, y| {
        last.copy_from_slice(y);
        true
    });
    match err {
        None => Ok(Ok(states.pop().expect("one output"))),
        Some(IntegrationError::Escape { .. }) => Ok(Err(last[0].signum())),
        Some(e) => Err(e.into()),
    }
}

fn extremal(
    sys: &SystemDef,
    cfg: &IntegratorConfig,
    omega: &DrivingPoint,
    x: &[f64],
    t: f64,
    mode: &ReachMode,
    allow_escape: bool,
) -> Result<ReachShape, ControlSetError> {
    let solver = Solver::new(sys, cfg.clone());
    match mode {
        ReachMode::ExactScalar => {
            if sys.state_dim() != 1 {
                return Err(ControlSetError::Unsupported("exact-scalar mode needs a scalar state".into()));
            }
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for u in vertex_controls(sys) {
                match endpoint(&solver, t, omega, x, &u)? {
                    Ok(y) => {
                        lo = lo.min(y[0]);
                        hi = hi.max(y[0]);
                    }
                    Err(sign) if allow_escape => {
                        if sign < 0.0 {
                            lo = f64::NEG_INFINITY;
                        } else {
                            hi = f64::INFINITY;
                        }
                    }
                    Err(_) => {
                        return Err(ControlSetError::Integration(IntegrationError::Escape {
                            time: t,
                            bound: cfg.blowup_bound,
                        }))
                    }
                }
            }
            Ok(ReachShape::Interval { lo, hi })
        }
        ReachMode::Sampled { levels, refinements, pieces, seed } => {
            let range = sys.control_range();
            let mut controls = sample_controls(range, *levels)?;
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let (a, b) = if t >= 0.0 { (0.0, t) } else { (t, 0.0) };
            controls.extend((0..*refinements).map(|_| random_signal(range, a, b, *pieces, &mut rng)));
            let mut points = Vec::with_capacity(controls.len());
            let mut escaped = 0;
            for u in &controls {
                match endpoint(&solver, t, omega, x, u)? {
                    Ok(y) => points.push(y),
                    Err(_) if allow_escape => escaped += 1,
                    Err(_) => {
                        return Err(ControlSetError::Integration(IntegrationError::Escape {
                            time: t,
                            bound: cfg.blowup_bound,
                        }))
                    }
                }
            }
            if points.is_empty() {
                return Err(ControlSetError::Integration(IntegrationError::Escape { time: t, bound: cfg.blowup_bound }));
            }
            Ok(ReachShape::Cloud { points, escaped })
        }
    }
}

/// `R_T(ω, x) = {φ(T, ω, x, u)}`.
pub fn reach_set(
    omega: &DrivingPoint,
    x: &[f64],
    t: f64,
    sys: &SystemDef,
    cfg: &IntegratorConfig,
    mode: &ReachMode,
) -> Result<ReachInterval, ControlSetError> {
    if !(t > 0.0) {
        return Err(ControlSetError::BadParams(format!("T must be positive, got {t}")));
    }
    let shape = extremal(sys, cfg, omega, x, t, mode, false)?;
    Ok(ReachInterval { omega: omega.clone(), base: x.to_vec(), horizon: t, shape })
}

/// `C_T(ω, x) = {y | x = φ(T, ω·(-T), y, u)}`, i.e. `{φ(-T, ω, x, u)}`.
///
/// Backward escape is not an error in scalar mode: by monotonicity in the
/// control value, every state beyond the escaping side is controllable to
/// `x`, so that end becomes infinite. Sampled mode drops and counts escapes.
pub fn control_set_to(
    omega: &DrivingPoint,
    x: &[f64],
    t: f64,
    sys: &SystemDef,
    cfg: &IntegratorConfig,
    mode: &ReachMode,
) -> Result<ReachInterval, ControlSetError> {
    if !(t > 0.0) {
        return Err(ControlSetError::BadParams(format!("T must be positive, got {t}")));
    }
    let shape = extremal(sys, cfg, omega, x, -t, mode, true)?;
    Ok(ReachInterval { omega: omega.clone(), base: x.to_vec(), horizon: t, shape })
}
