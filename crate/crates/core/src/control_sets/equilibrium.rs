use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::reach::{control_set_to, reach_set, ReachMode};
use super::ControlSetError;
use crate::cocycle::{IntegratorConfig, Solver, SystemDef};
use crate::driving::{DrivingGrid, DrivingPoint};
use crate::signals::ControlSignal;

/// Test times for the invariance residual.
pub const RESIDUAL_TIMES: [f64; 4] = [-2.0, -1.0, 1.0, 2.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PullbackConfig {
    /// Initial pullback horizon `H`.
    pub horizon: f64,
    /// `H` is doubled until the change drops below `tol` or `H` exceeds this.
    pub max_horizon: f64,
    /// Start state; the upper corner of `Q` when absent.
    pub seed: Option<Vec<f64>>,
    /// Allowed change of `α` when `H` doubles.
    pub tol: f64,
    /// Allowed invariance residual.
    pub residual_tol: f64,
}

impl Default for PullbackConfig {
    fn default() -> Self {
        PullbackConfig { horizon: 20.0, max_horizon: 640.0, seed: None, tol: 1e-5, residual_tol: 1e-4 }
    }
}

/// `α` at the cell centers, approximated by `φ(H, ω̂·(-H), x₀, 0)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumTable {
    pub grid: DrivingGrid,
    pub horizon: f64,
    pub seed: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    /// Largest change of `α` between `H/2` and `H`.
    pub change: f64,
}

fn pullback(solver: &Solver, omega: &DrivingPoint, h: f64, seed: &[f64]) -> Result<Vec<f64>, ControlSetError> {
    let sys = solver.system();
    let start = sys.driving().advance(omega, -h);
    Ok(solver.phi(h, start.coords(), seed, &ControlSignal::zero(sys.control_dim()))?)
}

/// Corners and face centers of `Q`.
fn boundary_samples(sys: &SystemDef) -> Vec<Vec<f64>> {
    let (lo, hi) = (sys.domain().lo(), sys.domain().hi());
    let d = lo.len();
    let mid: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let mut out = Vec::new();
    for mask in 0..(1usize << d) {
        out.push((0..d).map(|k| if mask >> k & 1 == 1 { hi[k] } else { lo[k] }).collect());
    }
    if d > 1 {
        for k in 0..d {
            for end in [lo[k], hi[k]] {
                let mut p = mid.clone();
                p[k] = end;
                out.push(p);
            }
        }
    }
    out
}

impl EquilibriumTable {
    pub fn cell_count(&self) -> usize {
        self.values.len()
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    /// `α(ω)` off the grid, with the table's horizon and seed.
    pub fn alpha_at(&self, sys: &SystemDef, cfg: &IntegratorConfig, omega: &DrivingPoint) -> Result<Vec<f64>, ControlSetError> {
        pullback(&Solver::new(sys, cfg.clone()), omega, self.horizon, &self.seed)
    }

    /// `|φ(s, ω, α(ω), 0) - α(ω·s)|` in the max norm.
    pub fn invariance_error(
        &self,
        sys: &SystemDef,
        cfg: &IntegratorConfig,
        omega: &DrivingPoint,
        s: f64,
    ) -> Result<f64, ControlSetError> {
        let solver = Solver::new(sys, cfg.clone());
        let a = pullback(&solver, omega, self.horizon, &self.seed)?;
        let moved = solver.phi(s, omega.coords(), &a, &ControlSignal::zero(sys.control_dim()))?;
        let target = pullback(&solver, &sys.driving().advance(omega, s), self.horizon, &self.seed)?;
        Ok(moved.iter().zip(&target).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max))
    }

    /// Columns `c1..cp, w1..wp, alpha1..alphad, residual`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let p = self.grid.dim();
        let d = self.seed.len();
        let mut header: Vec<String> = (1..=p).map(|i| format!("c{i}")).collect();
        header.extend((1..=p).map(|i| format!("w{i}")));
        header.extend((1..=d).map(|i| format!("alpha{i}")));
        header.push("residual".into());
        writeln!(out, "{}", header.join(","))?;
        for (c, (a, r)) in self.values.iter().zip(&self.residuals).enumerate() {
            let mut row: Vec<String> = self.grid.multi_index(c).iter().map(usize::to_string).collect();
            row.extend(self.grid.center(c).coords().iter().map(f64::to_string));
            row.extend(a.iter().map(f64::to_string));
            row.push(r.to_string());
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Pullback approximation of the attracting equilibrium reached from the seed.
///
/// Fails when trajectories from the boundary of `Q` do not end inside `Q`,
/// when doubling the horizon keeps changing `α` up to `max_horizon`, or when
/// the invariance residual exceeds `residual_tol`.
pub fn pullback_equilibrium(
    grid: &DrivingGrid,
    sys: &SystemDef,
    cfg: &IntegratorConfig,
    config: &PullbackConfig,
) -> Result<EquilibriumTable, ControlSetError> {
    if !(config.horizon > 0.0) || config.max_horizon < config.horizon {
        return Err(ControlSetError::BadParams(format!(
            "need 0 < horizon <= max_horizon, got {} and {}",
            config.horizon, config.max_horizon
        )));
    }
    if grid.dim() != sys.driving_dim() {
        return Err(ControlSetError::BadParams("grid dimension does not match the driving".into()));
    }
    let seed = config.seed.clone().unwrap_or_else(|| sys.domain().hi().to_vec());
    if seed.len() != sys.state_dim() {
        return Err(ControlSetError::BadParams("seed dimension does not match the state".into()));
    }
    let solver = Solver::new(sys, cfg.clone());
    let centers: Vec<DrivingPoint> = (0..grid.cell_count()).map(|c| grid.center(c)).collect();

    let samples = boundary_samples(sys);
    let escaped = centers
        .par_iter()
        .map(|w| -> Result<bool, ControlSetError> {
            let start = sys.driving().advance(w, -config.horizon);
            let zero = ControlSignal::zero(sys.control_dim());
            Ok(samples.iter().any(|b| match solver.phi(config.horizon, start.coords(), b, &zero) {
                Ok(y) => !sys.domain().contains(&y),
                Err(_) => true,
            }))
        })
        .collect::<Result<Vec<bool>, _>>()?;
    if let Some(c) = escaped.iter().position(|&e| e) {
        return Err(ControlSetError::NotDissipative { cell: c });
    }

    let table_at = |h: f64| -> Result<Vec<Vec<f64>>, ControlSetError> {
        centers.par_iter().map(|w| pullback(&solver, w, h, &seed)).collect()
    };
    let mut h = config.horizon;
    let mut prev = table_at(h)?;
    let (values, change) = loop {
        let next = table_at(2.0 * h)?;
        h *= 2.0;
        let change = prev
            .iter()
            .zip(&next)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(p, q)| (p - q).abs()))
            .fold(0.0, f64::max);
        if change < config.tol {
            break (next, change);
        }
        if 2.0 * h > config.max_horizon {
            return Err(ControlSetError::NoConvergence { horizon: h, change, residual: f64::NAN });
        }
        prev = next;
    };

    let zero = ControlSignal::zero(sys.control_dim());
    let residuals = centers
        .par_iter()
        .zip(&values)
        .map(|(w, a)| -> Result<f64, ControlSetError> {
            let mut r: f64 = 0.0;
            for s in RESIDUAL_TIMES {
                let y = solver.phi(s, w.coords(), a, &zero)?;
                let target = pullback(&solver, &sys.driving().advance(w, s), h, &seed)?;
                r = y.iter().zip(&target).map(|(p, q)| (p - q).abs()).fold(r, f64::max);
            }
            Ok(r)
        })
        .collect::<Result<Vec<f64>, _>>()?;
    let residual = residuals.iter().copied().fold(0.0, f64::max);
    if !(residual < config.residual_tol) {
        return Err(ControlSetError::NoConvergence { horizon: h, change, residual });
    }
    Ok(EquilibriumTable { grid: grid.clone(), horizon: h, seed, values, residuals, change })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellCondition {
    pub cell: usize,
    /// Radius of the largest ball around `α(ω̂·T)` inside `R_T(ω̂, α(ω̂))`.
    pub reach_margin: f64,
    /// Radius of the largest ball around `α(ω̂·(-T))` inside `C_T(ω̂, α(ω̂))`.
    pub controllable_margin: f64,
    pub passes: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactConditionReport {
    pub eps: f64,
    pub horizon: f64,
    pub cells: Vec<CellCondition>,
    /// Largest `ε' ≤ ε` passing on every cell, if any positive one does.
    pub eps_passing: Option<f64>,
}

impl ExactConditionReport {
    pub fn all_pass(&self) -> bool {
        self.cells.iter().all(|c| c.passes)
    }

    pub fn min_margin(&self) -> f64 {
        self.cells.iter().map(|c| c.reach_margin.min(c.controllable_margin)).fold(f64::INFINITY, f64::min)
    }
}

/// Tests `B_ε(α(ω̂·T)) ⊂ R_T(ω̂, α(ω̂))` and `B_ε(α(ω̂·(-T))) ⊂ C_T(ω̂, α(ω̂))`
/// on every cell center. Scalar systems only.
pub fn check_exact_condition(
    table: &EquilibriumTable,
    eps: f64,
    t: f64,
    sys: &SystemDef,
    cfg: &IntegratorConfig,
) -> Result<ExactConditionReport, ControlSetError> {
    if sys.state_dim() != 1 {
        return Err(ControlSetError::Unsupported("the exact condition is checked for scalar systems only".into()));
    }
    if !(eps > 0.0) {
        return Err(ControlSetError::BadParams(format!("eps must be positive, got {eps}")));
    }
    let cells = (0..table.cell_count())
        .into_par_iter()
        .map(|c| -> Result<CellCondition, ControlSetError> {
            let w = table.grid.center(c);
            let a = &table.values[c];
            let ahead = table.alpha_at(sys, cfg, &sys.driving().advance(&w, t))?;
            let behind = table.alpha_at(sys, cfg, &sys.driving().advance(&w, -t))?;
            let r = reach_set(&w, a, t, sys, cfg, &ReachMode::ExactScalar)?;
            let back = control_set_to(&w, a, t, sys, cfg, &ReachMode::ExactScalar)?;
            let reach_margin = r.margin(ahead[0]).expect("scalar interval");
            let controllable_margin = back.margin(behind[0]).expect("scalar interval");
            Ok(CellCondition { cell: c, reach_margin, controllable_margin, passes: reach_margin.min(controllable_margin) >= eps })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let worst = cells.iter().map(|c| c.reach_margin.min(c.controllable_margin)).fold(f64::INFINITY, f64::min);
    let eps_passing = (worst > 0.0).then(|| worst.min(eps));
    Ok(ExactConditionReport { eps, horizon: t, cells, eps_passing })
}
