use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::graph::{build_chain_graph, ChainGraph, ChainParams, Csr};
use super::scc::strongly_connected_components;
use super::{BoxCover, GraphError};
use crate::cocycle::{IntegratorConfig, Solver, SystemDef};
use crate::driving::{torus_distance, DrivingGrid, DrivingPoint};
use crate::signals::ControlSignal;

/// A set of graph nodes, sorted. Grouping by cell gives the fiber sections.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainSetApprox {
    nodes: Vec<usize>,
    box_count: usize,
}

impl ChainSetApprox {
    pub fn new(mut nodes: Vec<usize>, box_count: usize) -> Self {
        nodes.sort_unstable();
        nodes.dedup();
        ChainSetApprox { nodes, box_count }
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn box_count(&self) -> usize {
        self.box_count
    }

    pub fn contains(&self, node: usize) -> bool {
        self.nodes.binary_search(&node).is_ok()
    }

    pub fn is_subset_of(&self, other: &ChainSetApprox) -> bool {
        self.nodes.iter().all(|&n| other.contains(n))
    }

    pub fn membership(&self, node_count: usize) -> Vec<bool> {
        let mut m = vec![false; node_count];
        for &n in &self.nodes {
            m[n] = true;
        }
        m
    }

    /// Distinct driving cells, ascending.
    pub fn cells(&self) -> Vec<usize> {
        let mut cells: Vec<usize> = self.nodes.iter().map(|n| n / self.box_count).collect();
        cells.dedup();
        cells
    }

    /// Boxes of the fiber section over `cell`.
    pub fn fiber(&self, cell: usize) -> Vec<usize> {
        let lo = self.nodes.partition_point(|&n| n < cell * self.box_count);
        let hi = self.nodes.partition_point(|&n| n < (cell + 1) * self.box_count);
        self.nodes[lo..hi].iter().map(|n| n % self.box_count).collect()
    }

    /// Smallest lower and largest upper box corner over a fiber (scalar state).
    pub fn fiber_interval(&self, cover: &BoxCover, cell: usize) -> Option<(f64, f64)> {
        let fiber = self.fiber(cell);
        let first = *fiber.first()?;
        let last = *fiber.last()?;
        Some((cover.corners(first).0[0], cover.corners(last).1[0]))
    }

    /// Hull of all fiber intervals (scalar state).
    pub fn interval(&self, cover: &BoxCover) -> Option<(f64, f64)> {
        self.cells()
            .into_iter()
            .filter_map(|c| self.fiber_interval(cover, c))
            .reduce(|a, b| (a.0.min(b.0), a.1.max(b.1)))
    }

    /// Every member has an in-edge and an out-edge inside the set.
    pub fn has_internal_edges(&self, graph: &ChainGraph) -> bool {
        if self.is_empty() {
            return false;
        }
        let member = self.membership(graph.node_count());
        let mut has_in = vec![false; graph.node_count()];
        for &v in &self.nodes {
            let mut out = false;
            for &t in graph.successors(v) {
                if member[t as usize] {
                    out = true;
                    has_in[t as usize] = true;
                }
            }
            if !out {
                return false;
            }
        }
        self.nodes.iter().all(|&v| has_in[v])
    }

    /// Nodes within `cell_radius` cells (cyclic multi-index steps) and
    /// `box_radius` boxes of a member.
    pub fn inflate(&self, grid: &DrivingGrid, cover: &BoxCover, cell_radius: usize, box_radius: usize) -> ChainSetApprox {
        let mut out = BTreeSet::new();
        let boxes = cover.box_count();
        for c in self.cells() {
            let mut cells = vec![c];
            for _ in 0..cell_radius {
                let mut next: Vec<usize> = cells.iter().flat_map(|&k| grid.neighbors(k)).collect();
                next.sort_unstable();
                next.dedup();
                cells = next;
            }
            let mut fiber_boxes = BTreeSet::new();
            for b in self.fiber(c) {
                fiber_boxes.extend(cover.inflate_box(b, box_radius));
            }
            for &k in &cells {
                for &b in &fiber_boxes {
                    out.insert(k * boxes + b);
                }
            }
        }
        ChainSetApprox::new(out.into_iter().collect(), boxes)
    }

    /// Nodes whose cell center and box center are both within `eps` of a
    /// member's centers.
    pub fn eps_inflate(&self, grid: &DrivingGrid, cover: &BoxCover, eps: f64) -> ChainSetApprox {
        let reach = eps * (1.0 + 1e-9) + 1e-12;
        let boxes = cover.box_count();
        let centers: Vec<DrivingPoint> = (0..grid.cell_count()).map(|c| grid.center(c)).collect();
        let mut out = BTreeSet::new();
        for c in self.cells() {
            let near_cells: Vec<usize> = (0..grid.cell_count())
                .filter(|&k| torus_distance(centers[c].coords(), centers[k].coords()) <= reach)
                .collect();
            let mut fiber_boxes = BTreeSet::new();
            for b in self.fiber(c) {
                fiber_boxes.extend(cover.boxes_near(&cover.center(b), reach));
            }
            for &k in &near_cells {
                for &b in &fiber_boxes {
                    out.insert(k * boxes + b);
                }
            }
        }
        ChainSetApprox::new(out.into_iter().collect(), boxes)
    }
}

/// Components that can carry a complete trajectory: size > 1, or a single
/// node with a self-loop.
pub(crate) fn nontrivial_components(csr: &Csr) -> Vec<Vec<usize>> {
    strongly_connected_components(csr)
        .into_iter()
        .filter(|c| c.len() > 1 || csr.successors(c[0]).contains(&(c[0] as u32)))
        .collect()
}

pub fn chain_control_sets(graph: &ChainGraph) -> Vec<ChainSetApprox> {
    nontrivial_components(graph.csr())
        .into_iter()
        .map(|c| ChainSetApprox::new(c, graph.box_count()))
        .collect()
}

/// Forward closure of `start` under the edges; `start` itself appears only
/// if it lies on a cycle.
pub fn chain_reachable(graph: &ChainGraph, start: usize) -> Result<Vec<usize>, GraphError> {
    if start >= graph.node_count() {
        return Err(GraphError::UnknownNode(start));
    }
    let seen = graph.csr().reachable_from([start]);
    Ok(seen.iter().enumerate().filter(|(_, &s)| s).map(|(i, _)| i).collect())
}

/// Times (in units of `T`) at which connecting trajectories are sampled; the
/// auxiliary graph uses the same factors on top of the configured ones.
const SAMPLE_FACTORS: [f64; 5] = [1.0, 1.25, 1.5, 1.75, 2.0];

/// One chain-controllable component recovered from a single fiber.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FiberComponent {
    /// Boxes of the fiber over the start cell.
    pub fiber: Vec<usize>,
    /// Nodes collected along connecting trajectories.
    pub set: ChainSetApprox,
    /// Whether all collected nodes are mutually reachable in the auxiliary
    /// graph with its sampled edges split at the samples.
    pub mutually_reachable: bool,
}

#[derive(Clone, Debug)]
pub struct SingleFiber {
    pub start_cell: usize,
    pub return_cells: Vec<usize>,
    pub aux: ChainGraph,
    pub components: Vec<FiberComponent>,
}

/// Recovers chain control sets from the fiber over `omega0`.
///
/// An auxiliary graph with jump times in `[3T, 6T]` (the configured factors
/// plus the sampling factors, times `3T`) defines a relation on
/// the boxes of the start cell: `b → b'` when some path from `(c₀, b)`
/// reaches `b'` in a cell whose center lies within `ε` of `ω₀`. Each
/// nontrivial component `F` of that relation is expanded by sampling the
/// trajectories of every auxiliary edge on a path from `S ∩ F` to `R ∩ F` at
/// times `τ ∈ [T, 2T]`.
pub fn single_fiber_reconstruct(
    sys: &SystemDef,
    cover: &BoxCover,
    grid: &DrivingGrid,
    omega0: &DrivingPoint,
    params: &ChainParams,
    controls: &[ControlSignal],
    cfg: &IntegratorConfig,
) -> Result<SingleFiber, GraphError> {
    let mut aux_factors = params.jump_factors.clone();
    aux_factors.extend(SAMPLE_FACTORS);
    aux_factors.sort_by(f64::total_cmp);
    aux_factors.dedup();
    let aux_params = ChainParams { t: 3.0 * params.t, jump_factors: aux_factors, ..params.clone() };
    let aux = build_chain_graph(sys, cover, grid, &aux_params, controls, cfg)?;
    let boxes = cover.box_count();
    let c0 = grid.linear_cell_of(omega0.coords());
    let mut return_cells: Vec<usize> = (0..grid.cell_count())
        .filter(|&c| c == c0 || torus_distance(grid.center(c).coords(), omega0.coords()) < params.eps)
        .collect();
    return_cells.sort_unstable();

    let rows: Vec<Vec<usize>> = (0..boxes)
        .into_par_iter()
        .map(|b| {
            let seen = aux.csr().reachable_from([c0 * boxes + b]);
            let mut row: Vec<usize> =
                (0..boxes).filter(|&t| return_cells.iter().any(|&c| seen[c * boxes + t])).collect();
            row.dedup();
            row
        })
        .collect();
    let relation = Csr::from_adjacency(&rows);
    let fibers = nontrivial_components(&relation);
    if fibers.is_empty() {
        return Err(GraphError::NoFiberSet);
    }

    let transpose = aux.csr().transpose();
    let solver = Solver::new(sys, cfg.clone());
    let taus: Vec<f64> = SAMPLE_FACTORS.iter().map(|f| f * params.t).collect();
    let inflated = sys.domain().inflated();

    let mut components = Vec::with_capacity(fibers.len());
    for fiber in fibers {
        let starts: Vec<usize> = fiber.iter().map(|&b| c0 * boxes + b).collect();
        let ends: Vec<usize> =
            return_cells.iter().flat_map(|&c| fiber.iter().map(move |&b| c * boxes + b)).collect();
        let mut forward = aux.csr().reachable_from(starts.iter().copied());
        for &s in &starts {
            forward[s] = true;
        }
        let mut backward = transpose.reachable_from(ends.iter().copied());
        for &e in &ends {
            backward[e] = true;
        }
        // (source node, control) pairs of edges on a connecting path
        let mut pairs = BTreeSet::new();
        for v in (0..aux.node_count()).filter(|&v| forward[v]) {
            for (w, label) in aux.edges(v) {
                if backward[w] {
                    pairs.insert((v, label.control as usize));
                }
            }
        }
        let pairs: Vec<(usize, usize)> = pairs.into_iter().collect();
        let collected: Vec<Vec<usize>> = pairs
            .par_iter()
            .map(|&(v, ci)| {
                let (omega, x) = aux.node_center(v);
                let (states, _) =
                    solver.run_partial(omega.coords(), &x, &controls[ci], &taus, |_, y| inflated.contains(y));
                states
                    .iter()
                    .zip(&taus)
                    .filter_map(|(y, &tau)| {
                        let cell = grid.linear_cell_of(sys.driving().advance(&omega, tau).coords());
                        cover.box_of(y).map(|b| cell * boxes + b)
                    })
                    .collect()
            })
            .collect();

        // Split every sampled edge at its samples: v -> z after tau and
        // z -> w for the rest of the jump, which is at least T. End nodes
        // return to the start fiber through the final driving jump.
        let mut adj: Vec<Vec<usize>> =
            (0..aux.node_count()).map(|v| aux.successors(v).iter().map(|&w| w as usize).collect()).collect();
        for (&(v, ci), samples) in pairs.iter().zip(&collected) {
            let targets: Vec<usize> =
                aux.edges(v).filter(|(_, l)| l.control as usize == ci).map(|(w, _)| w).collect();
            for &z in samples {
                adj[v].push(z);
                adj[z].extend(&targets);
            }
        }
        for &c in return_cells.iter().filter(|&&c| c != c0) {
            for &b in &fiber {
                adj[c * boxes + b].push(c0 * boxes + b);
            }
        }
        let set = ChainSetApprox::new(collected.into_iter().flatten().collect(), boxes);
        let mutually_reachable = match set.nodes().first() {
            Some(&first) => {
                let split = Csr::from_adjacency(&adj);
                let fwd = split.reachable_from([first]);
                let bwd = split.transpose().reachable_from([first]);
                set.nodes().iter().all(|&v| fwd[v] && bwd[v])
            }
            None => false,
        };
        components.push(FiberComponent { fiber, set, mutually_reachable });
    }
    Ok(SingleFiber { start_cell: c0, return_cells, aux, components })
}
