use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{BoxCover, GraphError};
use crate::cocycle::{IntegratorConfig, Solver, SystemDef};
use crate::driving::{DrivingGrid, DrivingPoint};
use crate::signals::ControlSignal;

/// Compressed adjacency lists.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Csr {
    offsets: Vec<usize>,
    targets: Vec<u32>,
}

impl Csr {
    pub fn from_adjacency(adj: &[Vec<usize>]) -> Self {
        let mut offsets = Vec::with_capacity(adj.len() + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for row in adj {
            targets.extend(row.iter().map(|&t| t as u32));
            offsets.push(targets.len());
        }
        Csr { offsets, targets }
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len()
    }

    #[inline]
    pub fn successors(&self, v: usize) -> &[u32] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn transpose(&self) -> Csr {
        let n = self.node_count();
        let mut counts = vec![0usize; n + 1];
        for &t in &self.targets {
            counts[t as usize + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let offsets = counts.clone();
        let mut fill = counts;
        let mut targets = vec![0u32; self.targets.len()];
        for v in 0..n {
            for &t in self.successors(v) {
                targets[fill[t as usize]] = v as u32;
                fill[t as usize] += 1;
            }
        }
        Csr { offsets, targets }
    }

    /// Nodes reachable from `sources` by paths of length >= 1.
    pub fn reachable_from(&self, sources: impl IntoIterator<Item = usize>) -> Vec<bool> {
        let mut seen = vec![false; self.node_count()];
        let mut queue: std::collections::VecDeque<usize> = std::collections::VecDeque::new();
        for s in sources {
            for &t in self.successors(s) {
                if !seen[t as usize] {
                    seen[t as usize] = true;
                    queue.push_back(t as usize);
                }
            }
        }
        while let Some(v) = queue.pop_front() {
            for &t in self.successors(v) {
                if !seen[t as usize] {
                    seen[t as usize] = true;
                    queue.push_back(t as usize);
                }
            }
        }
        seen
    }
}

/// Edge label: index into the control list and into the jump-time list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeLabel {
    pub control: u16,
    pub time: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    /// Minimal jump time `T`.
    pub t: f64,
    /// Jump tolerance.
    pub eps: f64,
    /// Jump times are `factor · T`; every factor must lie in `[1, 2]`.
    pub jump_factors: Vec<f64>,
    /// Integrate from the box center and all corners instead of the center only.
    #[serde(default)]
    pub corner_sampling: bool,
}

impl ChainParams {
    pub fn new(t: f64, eps: f64) -> Self {
        ChainParams { t, eps, jump_factors: vec![1.0, 1.5, 2.0], corner_sampling: false }
    }

    pub fn jump_times(&self) -> Vec<f64> {
        self.jump_factors.iter().map(|f| f * self.t).collect()
    }
}

/// How an integrated endpoint `y` selects target boxes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum TargetRule {
    /// Every box whose center is within `eps` of `y`.
    Near(f64),
    /// The box containing `y` (no jump).
    Containing,
}

/// Directed graph over `(driving cell, box)` nodes, node id
/// `cell * box_count + box`.
#[derive(Clone, Debug)]
pub struct ChainGraph {
    csr: Csr,
    labels: Vec<EdgeLabel>,
    params: ChainParams,
    jump_times: Vec<f64>,
    controls: Vec<ControlSignal>,
    grid: DrivingGrid,
    cover: BoxCover,
}

impl ChainGraph {
    pub fn node_count(&self) -> usize {
        self.csr.node_count()
    }

    pub fn edge_count(&self) -> usize {
        self.csr.edge_count()
    }

    pub fn csr(&self) -> &Csr {
        &self.csr
    }

    pub fn params(&self) -> &ChainParams {
        &self.params
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn controls(&self) -> &[ControlSignal] {
        &self.controls
    }

    pub fn grid(&self) -> &DrivingGrid {
        &self.grid
    }

    pub fn cover(&self) -> &BoxCover {
        &self.cover
    }

    pub fn box_count(&self) -> usize {
        self.cover.box_count()
    }

    pub fn cell_count(&self) -> usize {
        self.grid.cell_count()
    }

    #[inline]
    pub fn node(&self, cell: usize, bx: usize) -> usize {
        cell * self.cover.box_count() + bx
    }

    #[inline]
    pub fn split(&self, node: usize) -> (usize, usize) {
        (node / self.cover.box_count(), node % self.cover.box_count())
    }

    /// Node containing `(ω, x)`, if `x ∈ Q`.
    pub fn node_of(&self, omega: &[f64], x: &[f64]) -> Option<usize> {
        Some(self.node(self.grid.linear_cell_of(omega), self.cover.box_of(x)?))
    }

    /// Cell center and box center.
    pub fn node_center(&self, node: usize) -> (DrivingPoint, Vec<f64>) {
        let (c, b) = self.split(node);
        (self.grid.center(c), self.cover.center(b))
    }

    pub fn successors(&self, node: usize) -> &[u32] {
        self.csr.successors(node)
    }

    /// `(target, label)` pairs leaving `node`.
    pub fn edges(&self, node: usize) -> impl Iterator<Item = (usize, EdgeLabel)> + '_ {
        let range = self.csr.offsets[node]..self.csr.offsets[node + 1];
        self.csr.targets[range.clone()].iter().map(|&t| t as usize).zip(self.labels[range].iter().copied())
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.successors(from).binary_search(&(to as u32)).is_ok()
    }

    /// All `(source, target, label)` triples in storage order.
    pub fn edge_list(&self) -> impl Iterator<Item = (usize, usize, EdgeLabel)> + '_ {
        (0..self.node_count()).flat_map(move |v| self.edges(v).map(move |(t, l)| (v, t, l)))
    }

    pub(crate) fn from_parts(
        rows: Vec<Vec<(u32, EdgeLabel)>>,
        params: ChainParams,
        jump_times: Vec<f64>,
        controls: Vec<ControlSignal>,
        grid: DrivingGrid,
        cover: BoxCover,
    ) -> Self {
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        let total: usize = rows.iter().map(Vec::len).sum();
        let mut targets = Vec::with_capacity(total);
        let mut labels = Vec::with_capacity(total);
        offsets.push(0);
        for row in rows {
            for (t, l) in row {
                targets.push(t);
                labels.push(l);
            }
            offsets.push(targets.len());
        }
        ChainGraph { csr: Csr { offsets, targets }, labels, params, jump_times, controls, grid, cover }
    }
}

/// Builds the controlled `(ε, T)`-chain graph: from every node center, every
/// control and every jump time, integrate and connect to the target cell and
/// every box whose center lies within `ε` of the endpoint. Trajectories that
/// leave the 10%-inflated domain contribute no edges from then on.
pub fn build_chain_graph(
    sys: &SystemDef,
    cover: &BoxCover,
    grid: &DrivingGrid,
    params: &ChainParams,
    controls: &[ControlSignal],
    cfg: &IntegratorConfig,
) -> Result<ChainGraph, GraphError> {
    if !(params.t > 0.0) {
        return Err(GraphError::BadParams(format!("T must be positive, got {}", params.t)));
    }
    if params.jump_factors.is_empty() || params.jump_factors.iter().any(|f| !(1.0..=2.0).contains(f)) {
        return Err(GraphError::BadParams(format!(
            "jump factors must be nonempty and lie in [1, 2], got {:?}",
            params.jump_factors
        )));
    }
    let needed = required_eps(sys, cover, grid);
    if params.eps < needed * (1.0 - 1e-12) {
        return Err(GraphError::EpsilonTooSmall { eps: params.eps, needed });
    }
    build_graph_with(sys, cover, grid, params, controls, cfg, TargetRule::Near(params.eps))
}

/// Smallest admissible `ε`: the box diameter, and the driving cell diameter
/// when the fields actually depend on the driving angle.
pub fn required_eps(sys: &SystemDef, cover: &BoxCover, grid: &DrivingGrid) -> f64 {
    let mut needed = cover.box_diameter();
    if sys.depends_on_driving() {
        needed = needed.max(grid.cell_diameter());
    }
    needed
}

pub(crate) fn build_graph_with(
    sys: &SystemDef,
    cover: &BoxCover,
    grid: &DrivingGrid,
    params: &ChainParams,
    controls: &[ControlSignal],
    cfg: &IntegratorConfig,
    rule: TargetRule,
) -> Result<ChainGraph, GraphError> {
    if controls.is_empty() {
        return Err(GraphError::NoControls);
    }
    if controls.len() > u16::MAX as usize + 1 || params.jump_factors.len() > u8::MAX as usize + 1 {
        return Err(GraphError::BadParams("too many controls or jump times for the edge labels".into()));
    }
    if grid.dim() != sys.driving_dim() || cover.per_dim().len() != sys.state_dim() {
        return Err(GraphError::BadParams("grid or cover dimension does not match the system".into()));
    }
    if let Some(u) = controls.iter().find(|u| u.channels() != sys.control_dim()) {
        return Err(GraphError::BadParams(format!(
            "control has {} channels, system has {}",
            u.channels(),
            sys.control_dim()
        )));
    }
    cfg.validate(sys.domain()).map_err(|e| GraphError::BadParams(e.to_string()))?;

    let mut order: Vec<usize> = (0..params.jump_factors.len()).collect();
    order.sort_by(|&a, &b| params.jump_factors[a].total_cmp(&params.jump_factors[b]));
    let jump_times = params.jump_times();
    let sorted_times: Vec<f64> = order.iter().map(|&i| jump_times[i]).collect();

    let cells = grid.cell_count();
    let boxes = cover.box_count();
    let target_cells: Vec<Vec<usize>> = (0..cells)
        .map(|c| {
            let center = grid.center(c);
            jump_times
                .iter()
                .map(|&t| grid.linear_cell_of(sys.driving().advance(&center, t).coords()))
                .collect()
        })
        .collect();
    let inflated = sys.domain().inflated();
    let solver = Solver::new(sys, cfg.clone());

    let rows: Vec<Vec<(u32, EdgeLabel)>> = (0..cells * boxes)
        .into_par_iter()
        .map(|node| {
            let (c, b) = (node / boxes, node % boxes);
            let omega = grid.center(c);
            let points = if params.corner_sampling { cover.test_points(b) } else { vec![cover.center(b)] };
            let mut row = Vec::new();
            for (ci, u) in controls.iter().enumerate() {
                for x in &points {
                    let (states, _) =
                        solver.run_partial(omega.coords(), x, u, &sorted_times, |_, y| inflated.contains(y));
                    for (k, y) in states.iter().enumerate() {
                        let ti = order[k];
                        let base = target_cells[c][ti] * boxes;
                        let label = EdgeLabel { control: ci as u16, time: ti as u8 };
                        match rule {
                            TargetRule::Near(eps) => {
                                for t in cover.boxes_near(y, eps) {
                                    row.push(((base + t) as u32, label));
                                }
                            }
                            TargetRule::Containing => {
                                if let Some(t) = cover.box_of(y) {
                                    row.push(((base + t) as u32, label));
                                }
                            }
                        }
                    }
                }
            }
            row.sort_unstable();
            row.dedup();
            row
        })
        .collect();

    let graph = ChainGraph::from_parts(rows, params.clone(), jump_times, controls.to_vec(), grid.clone(), cover.clone());
    if graph.edge_count() == 0 {
        return Err(GraphError::EmptyGraph);
    }
    Ok(graph)
}
