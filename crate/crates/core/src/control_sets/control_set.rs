use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::equilibrium::EquilibriumTable;
use super::ControlSetError;
use crate::cocycle::{IntegratorConfig, Solver, SystemDef};
use crate::cover_graph::{build_graph_with, BoxCover, ChainGraph, ChainParams, ChainSetApprox, TargetRule};
use crate::driving::DrivingGrid;
use crate::signals::{random_signal, ControlSignal};

/// Nodes mutually reachable with the graph of `α` through exact trajectories.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlSetApprox {
    pub set: ChainSetApprox,
    /// Node containing `(ω̂, α(ω̂))` for every cell.
    pub seeds: Vec<usize>,
    /// Per cell: boxes of the set on every side of the seed box, minimum over
    /// the directions.
    pub margins: Vec<usize>,
    /// Every seed has at least one member box on each side.
    pub interior: bool,
    /// The seeds are mutually reachable.
    pub seeds_connected: bool,
    /// The set is exactly the seed set; box resolution cannot show whether
    /// the control set has interior.
    pub seed_only: bool,
}

/// Graph whose edges join a node to the node containing the endpoint of an
/// exact trajectory (no jump), for every control and jump time `T, 1.5T, 2T`.
pub fn exact_graph(
    sys: &SystemDef,
    cover: &BoxCover,
    grid: &DrivingGrid,
    t: f64,
    controls: &[ControlSignal],
    cfg: &IntegratorConfig,
) -> Result<ChainGraph, ControlSetError> {
    if !(t > 0.0) {
        return Err(ControlSetError::BadParams(format!("T must be positive, got {t}")));
    }
    Ok(build_graph_with(sys, cover, grid, &ChainParams::new(t, 0.0), controls, cfg, TargetRule::Containing)?)
}

/// Forward closure of the seeds intersected with their backward closure.
pub fn control_set_in(graph: &ChainGraph, table: &EquilibriumTable) -> Result<ControlSetApprox, ControlSetError> {
    let cover = graph.cover();
    if table.cell_count() != graph.cell_count() {
        return Err(ControlSetError::BadParams("equilibrium table and graph use different grids".into()));
    }
    let mut seeds = Vec::with_capacity(table.cell_count());
    for (c, a) in table.values.iter().enumerate() {
        let b = cover.box_of(a).ok_or(ControlSetError::SeedOutside { cell: c })?;
        seeds.push(graph.node(c, b));
    }
    let transpose = graph.csr().transpose();
    let mut fwd = graph.csr().reachable_from(seeds.iter().copied());
    let mut bwd = transpose.reachable_from(seeds.iter().copied());
    for &s in &seeds {
        fwd[s] = true;
        bwd[s] = true;
    }
    let nodes: Vec<usize> = (0..graph.node_count()).filter(|&v| fwd[v] && bwd[v]).collect();
    let set = ChainSetApprox::new(nodes, cover.box_count());

    let from0 = graph.csr().reachable_from([seeds[0]]);
    let to0 = transpose.reachable_from([seeds[0]]);
    let seeds_connected = seeds.iter().all(|&s| from0[s] && to0[s]);

    let d = cover.per_dim().len();
    let margins: Vec<usize> = seeds
        .iter()
        .map(|&s| {
            let (c, b) = graph.split(s);
            let origin = cover.multi_index(b);
            let mut best = usize::MAX;
            for k in 0..d {
                for dir in [-1i64, 1] {
                    let mut steps = 0;
                    let mut idx = origin.clone();
                    loop {
                        let next = idx[k] as i64 + dir;
                        if next < 0 || next >= cover.per_dim()[k] as i64 {
                            break;
                        }
                        idx[k] = next as usize;
                        if !set.contains(graph.node(c, cover.linear_index(&idx))) {
                            break;
                        }
                        steps += 1;
                    }
                    best = best.min(steps);
                }
            }
            best
        })
        .collect();
    let interior = margins.iter().all(|&m| m >= 1);
    let mut seed_set = seeds.clone();
    seed_set.sort_unstable();
    seed_set.dedup();
    let seed_only = set.nodes() == seed_set.as_slice();
    Ok(ControlSetApprox { set, seeds, margins, interior, seeds_connected, seed_only })
}

/// Control set containing the graph of `α`, from the exact graph at jump
/// time `t`.
pub fn control_set_around(
    table: &EquilibriumTable,
    sys: &SystemDef,
    controls: &[ControlSignal],
    t: f64,
    cfg: &IntegratorConfig,
    cover: &BoxCover,
    grid: &DrivingGrid,
) -> Result<ControlSetApprox, ControlSetError> {
    let graph = exact_graph(sys, cover, grid, t, controls, cfg)?;
    control_set_in(&graph, table)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoReturnConfig {
    pub samples: usize,
    /// `t₀` is drawn from `[min_time, max_time]`.
    pub min_time: f64,
    pub max_time: f64,
    /// Intermediate times checked on `[0, t₀]`.
    pub checkpoints: usize,
    pub pieces: usize,
    pub seed: u64,
}

impl Default for NoReturnConfig {
    fn default() -> Self {
        NoReturnConfig { samples: 500, min_time: 0.5, max_time: 5.0, checkpoints: 20, pieces: 4, seed: 7 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoReturnReport {
    pub checked: usize,
    /// Samples whose endpoint left the set.
    pub skipped: usize,
    /// Checked samples with an intermediate point outside the one-box,
    /// one-cell inflation of the set.
    pub violations: usize,
}

/// Trajectories that start and end in `D` stay in its one-box inflation in
/// between.
pub fn verify_no_return(
    d: &ChainSetApprox,
    grid: &DrivingGrid,
    cover: &BoxCover,
    sys: &SystemDef,
    cfg: &IntegratorConfig,
    config: &NoReturnConfig,
) -> Result<NoReturnReport, ControlSetError> {
    if d.is_empty() {
        return Err(ControlSetError::BadParams("empty control set".into()));
    }
    let inflated = d.inflate(grid, cover, 1, 1);
    let solver = Solver::new(sys, cfg.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut report = NoReturnReport { checked: 0, skipped: 0, violations: 0 };
    let node_of = |omega: &[f64], x: &[f64]| cover.box_of(x).map(|b| grid.linear_cell_of(omega) * cover.box_count() + b);
    for _ in 0..config.samples {
        let start = d.nodes()[rng.gen_range(0..d.len())];
        let (c, b) = (start / cover.box_count(), start % cover.box_count());
        let omega = grid.center(c);
        let (lo, hi) = cover.corners(b);
        let x: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| rng.gen_range(*l..*h)).collect();
        let t0 = rng.gen_range(config.min_time..=config.max_time);
        let u = random_signal(sys.control_range(), 0.0, t0, config.pieces, &mut rng);
        let n = config.checkpoints.max(1);
        let times: Vec<f64> = (1..=n).map(|k| t0 * k as f64 / n as f64).collect();
        let Ok(states) = solver.run(omega.coords(), &x, &u, &times, |_, _| true) else {
            report.skipped += 1;
            continue;
        };
        let at = |k: usize| node_of(sys.driving().advance(&omega, times[k]).coords(), &states[k]);
        if !at(n - 1).is_some_and(|v| d.contains(v)) {
            report.skipped += 1;
            continue;
        }
        report.checked += 1;
        if (0..n).any(|k| !at(k).is_some_and(|v| inflated.contains(v))) {
            report.violations += 1;
        }
    }
    Ok(report)
}
