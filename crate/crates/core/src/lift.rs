//! Lifts of chain control sets to `𝒰 × Ω × M`: complete controlled
//! trajectories inside a set, certified on a finite window, and chains of
//! the control flow between them.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cocycle::{ExtendedState, IntegrationError, IntegratorConfig, Solver, SystemDef};
use crate::cover_graph::{BoxCover, ChainGraph, ChainSetApprox, EdgeLabel};
use crate::driving::{torus_distance, DrivingGrid, DrivingPoint};
use crate::signals::{weak_star_distance, ControlSignal, MetricBasis, SignalError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LiftError {
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("empty set")]
    EmptySet,
    #[error("node {0} is not in the set")]
    NotInSet(usize),
    #[error("no cycle of the set passes through node {0}")]
    NoCycle(usize),
    #[error("no path inside the set from node {from} to node {to}")]
    PathAbsent { from: usize, to: usize },
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("chain link {link} has {component} distance {distance}, not below eps = {eps}")]
    ChainTooCoarse { link: usize, component: String, distance: f64, eps: f64 },
}

/// `(u, ω, x)` whose trajectory stays in a chain control set on `[-window, window]`.
///
/// The trajectory is the forward solution from `anchor` at relative time
/// `anchor_time ≤ -window`; `(ω, x)` is its value at time 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftedSample {
    pub control: ControlSignal,
    pub omega: DrivingPoint,
    pub x: Vec<f64>,
    pub window: f64,
    /// Node the walk passes at time 0.
    pub node: usize,
    pub anchor_time: f64,
    pub anchor: ExtendedState,
}

impl LiftedSample {
    fn anchor_control(&self) -> ControlSignal {
        self.control.shift(self.anchor_time)
    }

    /// Integration points `(t, ω·t, x(t))` for relative times in `[t0, t1]`,
    /// integrated forward from the anchor.
    pub fn trajectory(
        &self,
        sys: &SystemDef,
        cfg: &IntegratorConfig,
        t0: f64,
        t1: f64,
    ) -> Result<Vec<(f64, DrivingPoint, Vec<f64>)>, LiftError> {
        if t0 < self.anchor_time - 1e-9 || t1 < t0 {
            return Err(LiftError::BadParams(format!("[{t0}, {t1}] starts before the anchor {}", self.anchor_time)));
        }
        let solver = Solver::new(sys, cfg.clone());
        let driving = sys.driving();
        let mut out = Vec::new();
        let start = t0 - self.anchor_time;
        let anchor = &self.anchor;
        let u = self.anchor_control();
        if start <= 1e-12 {
            out.push((self.anchor_time, anchor.omega.clone(), anchor.x.clone()));
        }
        solver.run(anchor.omega.coords(), &anchor.x, &u, &[t1 - self.anchor_time], |s, y| {
            if s >= start - 1e-12 {
                out.push((s + self.anchor_time, driving.advance(&anchor.omega, s), y.to_vec()));
            }
            true
        })?;
        Ok(out)
    }

    /// State at relative time `t ≥ anchor_time`, from the anchor.
    pub fn state_at(&self, sys: &SystemDef, cfg: &IntegratorConfig, t: f64) -> Result<ExtendedState, LiftError> {
        if t < self.anchor_time {
            return Err(LiftError::BadParams(format!("time {t} is before the anchor {}", self.anchor_time)));
        }
        let solver = Solver::new(sys, cfg.clone());
        Ok(solver.psi(t - self.anchor_time, &self.anchor.omega, &self.anchor.x, &self.anchor_control())?)
    }

    /// `Φ_t` applied to the sample; the anchor is kept and the window shrinks by `|t|`.
    pub fn shifted(&self, sys: &SystemDef, cfg: &IntegratorConfig, t: f64) -> Result<LiftedSample, LiftError> {
        let solver = Solver::new(sys, cfg.clone());
        let (control, state) = solver.flow_step(t, &self.control, &self.omega, &self.x)?;
        Ok(LiftedSample {
            control,
            omega: state.omega,
            x: state.x,
            window: self.window - t.abs(),
            node: self.node,
            anchor_time: self.anchor_time - t,
            anchor: self.anchor.clone(),
        })
    }

    /// Whether every integration point on `[-window, window]` lies in a
    /// node of `member`.
    pub fn stays_in(
        &self,
        sys: &SystemDef,
        cfg: &IntegratorConfig,
        grid: &DrivingGrid,
        cover: &BoxCover,
        member: &[bool],
    ) -> Result<bool, LiftError> {
        let points = self.trajectory(sys, cfg, -self.window, self.window)?;
        Ok(points.iter().all(|(_, w, x)| node_of(grid, cover, w, x).is_some_and(|n| member[n])))
    }
}

fn node_of(grid: &DrivingGrid, cover: &BoxCover, omega: &DrivingPoint, x: &[f64]) -> Option<usize> {
    Some(grid.linear_cell_of(omega.coords()) * cover.box_count() + cover.box_of(x)?)
}

/// Edges of the graph with both ends in the set, both directions.
struct SetEdges {
    succ: Vec<Vec<(usize, EdgeLabel)>>,
    pred: Vec<Vec<(usize, EdgeLabel)>>,
}

impl SetEdges {
    fn new(set: &ChainSetApprox, graph: &ChainGraph) -> Self {
        let n = graph.node_count();
        let member = set.membership(n);
        let mut succ = vec![Vec::new(); n];
        let mut pred = vec![Vec::new(); n];
        for &v in set.nodes() {
            for (w, l) in graph.edges(v) {
                if member[w] {
                    succ[v].push((w, l));
                    pred[w].push((v, l));
                }
            }
        }
        SetEdges { succ, pred }
    }
}

/// Random walk of total jump time at least `total`, as chronological
/// `(from, to, label)` edges.
fn walk<R: Rng>(
    edges: &SetEdges,
    times: &[f64],
    node: usize,
    total: f64,
    forward: bool,
    rng: &mut R,
) -> Vec<(usize, usize, EdgeLabel)> {
    let mut out = Vec::new();
    let mut at = node;
    let mut elapsed = 0.0;
    while elapsed < total {
        let options = if forward { &edges.succ[at] } else { &edges.pred[at] };
        let (next, label) = options[rng.gen_range(0..options.len())];
        elapsed += times[label.time as usize];
        out.push(if forward { (at, next, label) } else { (next, at, label) });
        at = next;
    }
    if !forward {
        out.reverse();
    }
    out
}

/// Concatenation of the edge controls, edge `k` starting at `start + Σ_{i<k} τ_i`.
fn walk_control(graph: &ChainGraph, edges: &[(usize, usize, EdgeLabel)], start: f64) -> ControlSignal {
    let times = graph.jump_times();
    let controls = graph.controls();
    let mut t = start;
    let mut sig = controls[edges[0].2.control as usize].shift(-t);
    for &(_, _, l) in edges {
        if t > start {
            sig = sig.concatenate(&controls[l.control as usize], t);
        }
        t += times[l.time as usize];
    }
    sig
}

/// One sample through `node`: walks at least `window` backwards and
/// forwards inside the set, integrates from the first walk node and keeps
/// the result when the trajectory stays in `member` on `[-window, window]`.
#[allow(clippy::too_many_arguments)]
pub fn lift_at<R: Rng>(
    set: &ChainSetApprox,
    graph: &ChainGraph,
    sys: &SystemDef,
    cfg: &IntegratorConfig,
    window: f64,
    node: usize,
    member: &[bool],
    rng: &mut R,
) -> Result<Option<LiftedSample>, LiftError> {
    if !set.contains(node) {
        return Err(LiftError::NotInSet(node));
    }
    let edges = SetEdges::new(set, graph);
    lift_with(&edges, graph, sys, cfg, window, node, member, rng)
}

#[allow(clippy::too_many_arguments)]
fn lift_with<R: Rng>(
    edges: &SetEdges,
    graph: &ChainGraph,
    sys: &SystemDef,
    cfg: &IntegratorConfig,
    window: f64,
    node: usize,
    member: &[bool],
    rng: &mut R,
) -> Result<Option<LiftedSample>, LiftError> {
    if edges.succ[node].is_empty() || edges.pred[node].is_empty() {
        return Err(LiftError::NoCycle(node));
    }
    let times = graph.jump_times();
    let back = walk(edges, times, node, window, false, rng);
    let ahead = walk(edges, times, node, window, true, rng);
    let back_time: f64 = back.iter().map(|e| times[e.2.time as usize]).sum();
    let path: Vec<_> = back.iter().chain(&ahead).copied().collect();
    let control = walk_control(graph, &path, -back_time);

    let (omega0, x0) = graph.node_center(path[0].0);
    let anchor = ExtendedState { omega: omega0, x: x0 };
    let sample = LiftedSample {
        omega: sys.driving().advance(&anchor.omega, back_time),
        x: Vec::new(),
        control,
        window,
        node,
        anchor_time: -back_time,
        anchor,
    };
    let at0 = match sample.state_at(sys, cfg, 0.0) {
        Ok(s) => s,
        Err(LiftError::Integration(IntegrationError::Escape { .. })) => return Ok(None),
        Err(e) => return Err(e),
    };
    let sample = LiftedSample { x: at0.x, ..sample };
    match sample.stays_in(sys, cfg, graph.grid(), graph.cover(), member) {
        Ok(true) => Ok(Some(sample)),
        Ok(false) | Err(LiftError::Integration(IntegrationError::Escape { .. })) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Up to `count` certified samples through randomly chosen nodes of the set,
/// trying at most `10 · count` walks.
pub fn lift_samples(
    set: &ChainSetApprox,
    graph: &ChainGraph,
    sys: &SystemDef,
    cfg: &IntegratorConfig,
    window: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<LiftedSample>, LiftError> {
    if set.is_empty() {
        return Err(LiftError::EmptySet);
    }
    if !(window > 0.0) {
        return Err(LiftError::BadParams(format!("window must be positive, got {window}")));
    }
    let member = set.inflate(graph.grid(), graph.cover(), 1, 1).membership(graph.node_count());
    let edges = SetEdges::new(set, graph);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..10 * count {
        if out.len() == count {
            break;
        }
        let node = set.nodes()[rng.gen_range(0..set.len())];
        if let Some(s) = lift_with(&edges, graph, sys, cfg, window, node, &member, &mut rng)? {
            out.push(s);
        }
    }
    Ok(out)
}

/// One step of an `(ε, T)`-chain of the control flow.
///
/// Controls are given as shifts of the chain's global control: the source
/// control is `θ_offset G`, except for the first link, whose source control
/// is the first sample's own, and the last link, whose target control is
/// the second sample's own.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiChainLink {
    pub source_omega: DrivingPoint,
    pub source_x: Vec<f64>,
    pub source_offset: f64,
    pub target_omega: DrivingPoint,
    pub target_x: Vec<f64>,
    pub jump_time: f64,
    pub control_distance: f64,
    pub state_distance: f64,
    pub driving_distance: f64,
}

impl PhiChainLink {
    /// Max of the control, state and driving distances.
    pub fn distance(&self) -> f64 {
        self.control_distance.max(self.state_distance).max(self.driving_distance)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiChain {
    pub eps: f64,
    pub t: f64,
    pub control: ControlSignal,
    pub links: Vec<PhiChainLink>,
    /// Length of the links taken along the two samples.
    pub lead: f64,
    pub basis_window: f64,
    pub basis_len: usize,
}

impl PhiChain {
    pub fn max_distance(&self) -> f64 {
        self.links.iter().map(PhiChainLink::distance).fold(0.0, f64::max)
    }

    fn check(self) -> Result<PhiChain, LiftError> {
        for (i, l) in self.links.iter().enumerate() {
            if !(l.distance() < self.eps) {
                let (component, distance) = [
                    ("control", l.control_distance),
                    ("state", l.state_distance),
                    ("driving", l.driving_distance),
                ]
                .into_iter()
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .expect("three components");
                return Err(LiftError::ChainTooCoarse { link: i, component: component.into(), distance, eps: self.eps });
            }
        }
        Ok(self)
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

/// Box `b` with a relative inset, so the clamped point stays in `b`.
fn clamp_into(cover: &BoxCover, b: usize, y: &[f64]) -> Vec<f64> {
    let (lo, hi) = cover.corners(b);
    y.iter()
        .zip(lo.iter().zip(&hi))
        .map(|(v, (l, h))| {
            let pad = 1e-9 * (h - l);
            v.clamp(l + pad, h - pad)
        })
        .collect()
}

/// An `(ε, T)`-chain of the control flow from `s1` to `s2`.
///
/// A single link of length `T`, `1.5T` or `2T` is used when it already fits.
/// Otherwise, with `L = max(T, S)` for the basis window `S`, the chain runs
/// `L` twice along `s1`, follows graph edges inside the inflated set from
/// `ψ(2L, s1)` to the node of `ψ(-L, s2)` (jumping into the intended box only
/// when an endpoint misses it) and ends with `L` along `s2`. All controls are
/// shifts of one concatenated control, so every control distance is exactly
/// zero. For periodic driving the walk also has to match the phase of
/// `ψ(-L, s2)` to within `ε/2`, steering by distances over phase buckets.
#[allow(clippy::too_many_arguments)]
pub fn phi_chain_between(
    s1: &LiftedSample,
    s2: &LiftedSample,
    eps: f64,
    t: f64,
    graph: &ChainGraph,
    set: &ChainSetApprox,
    basis: &MetricBasis,
    sys: &SystemDef,
    cfg: &IntegratorConfig,
) -> Result<PhiChain, LiftError> {
    if !(eps > 0.0 && t > 0.0) || t > graph.params().t * (1.0 + 1e-12) {
        return Err(LiftError::BadParams(format!(
            "need eps > 0 and 0 < T <= the graph's T = {}, got eps = {eps}, T = {t}",
            graph.params().t
        )));
    }
    let wrap = |control: ControlSignal, links, lead| PhiChain {
        eps,
        t,
        control,
        links,
        lead,
        basis_window: basis.window(),
        basis_len: basis.len(),
    };
    if s1 == s2 {
        return Ok(wrap(s1.control.clone(), Vec::new(), 0.0));
    }
    let solver = Solver::new(sys, cfg.clone());

    let mut direct: Vec<f64> = graph.jump_times().iter().copied().filter(|&x| x >= t).collect();
    direct.push(t);
    direct.sort_by(f64::total_cmp);
    direct.dedup();
    for &tau in &direct {
        let end = solver.psi(tau, &s1.omega, &s1.x, &s1.control)?;
        let link = PhiChainLink {
            source_omega: s1.omega.clone(),
            source_x: s1.x.clone(),
            source_offset: 0.0,
            target_omega: end.omega.clone(),
            target_x: s2.x.clone(),
            jump_time: tau,
            control_distance: weak_star_distance(&s1.control.shift(tau), &s2.control, basis)?,
            state_distance: max_abs_diff(&end.x, &s2.x),
            driving_distance: torus_distance(end.omega.coords(), s2.omega.coords()),
        };
        if link.distance() < eps {
            return Ok(wrap(s1.control.clone(), vec![link], tau));
        }
    }

    let lead = t.max(basis.window());
    let inflated = set.inflate(graph.grid(), graph.cover(), 1, 1);
    let edges = SetEdges::new(&inflated, graph);
    let (control, links) = splice(s1, s2, eps, lead, graph, &inflated, &edges, basis, &solver)?;
    wrap(control, links, lead).check()
}

/// Phase buckets for periodic driving; the grid cells carry the phase otherwise.
struct Phase {
    buckets: usize,
    frequency: f64,
}

impl Phase {
    fn new(sys: &SystemDef, eps: f64) -> Self {
        let driving = sys.driving();
        if driving.is_periodic() {
            Phase { buckets: (4.0 / eps).ceil().max(1.0) as usize, frequency: driving.frequencies()[0] }
        } else {
            Phase { buckets: 1, frequency: 0.0 }
        }
    }

    fn bucket(&self, omega: &DrivingPoint) -> usize {
        if self.buckets == 1 {
            return 0;
        }
        ((omega.coords()[0] * self.buckets as f64) as usize).min(self.buckets - 1)
    }

    fn shift(&self, tau: f64) -> usize {
        let k = self.buckets as f64;
        ((tau * self.frequency * k).round().rem_euclid(k)) as usize
    }
}

/// Reverse breadth-first distances over `(node, phase bucket)` to `goal`.
fn phase_distances(edges: &SetEdges, graph: &ChainGraph, phase: &Phase, goal: (usize, usize)) -> Vec<usize> {
    let k = phase.buckets;
    let shifts: Vec<usize> = graph.jump_times().iter().map(|&tau| phase.shift(tau)).collect();
    let mut dist = vec![usize::MAX; graph.node_count() * k];
    dist[goal.0 * k + goal.1] = 0;
    let mut queue = VecDeque::from([goal]);
    while let Some((w, b)) = queue.pop_front() {
        let here = dist[w * k + b];
        for &(v, l) in &edges.pred[w] {
            let pb = (b + k - shifts[l.time as usize]) % k;
            if dist[v * k + pb] == usize::MAX {
                dist[v * k + pb] = here + 1;
                queue.push_back((v, pb));
            }
        }
    }
    dist
}

/// The spliced chain with links of length `lead` along the samples, unchecked.
#[allow(clippy::too_many_arguments)]
fn splice(
    s1: &LiftedSample,
    s2: &LiftedSample,
    eps: f64,
    lead: f64,
    graph: &ChainGraph,
    inflated: &ChainSetApprox,
    edges: &SetEdges,
    basis: &MetricBasis,
    solver: &Solver,
) -> Result<(ControlSignal, Vec<PhiChainLink>), LiftError> {
    let (grid, cover) = (graph.grid(), graph.cover());
    let sys = solver.system();
    let goal = s2.state_at(sys, solver.config(), -lead)?;
    let goal_node = node_of(grid, cover, &goal.omega, &goal.x)
        .filter(|&n| inflated.contains(n))
        .ok_or(LiftError::NotInSet(s2.node))?;
    let phase = Phase::new(sys, eps);
    let k = phase.buckets;
    let dist = phase_distances(edges, graph, &phase, (goal_node, phase.bucket(&goal.omega)));
    let arrived = |node: usize, omega: &DrivingPoint| {
        node == goal_node && (k == 1 || torus_distance(omega.coords(), goal.omega.coords()) < 0.5 * eps)
    };

    // chain points (ω_j, x_j), their start times on the global clock and durations
    let mut points: Vec<(DrivingPoint, Vec<f64>)> = vec![(s1.omega.clone(), s1.x.clone())];
    let mut starts = vec![0.0, lead];
    let mut durations = vec![lead, lead];
    let mut labels: Vec<EdgeLabel> = Vec::new();
    let first = solver.psi(lead, &s1.omega, &s1.x, &s1.control)?;
    points.push((first.omega, first.x));
    let mut clock = 2.0 * lead;
    let mut end = solver.psi(clock, &s1.omega, &s1.x, &s1.control)?;
    let mut intended = node_of(grid, cover, &end.omega, &end.x);
    let limit = 4 * inflated.len() * k + 100;
    loop {
        let at = node_of(grid, cover, &end.omega, &end.x);
        if at.is_some_and(|a| arrived(a, &end.omega)) || intended.is_some_and(|i| arrived(i, &end.omega)) {
            points.push((end.omega.clone(), goal.x.clone()));
            break;
        }
        let x = match (at, intended) {
            (Some(a), Some(i)) if a == i => end.x.clone(),
            (_, Some(i)) => clamp_into(cover, i % cover.box_count(), &end.x),
            _ => return Err(LiftError::PathAbsent { from: s1.node, to: s2.node }),
        };
        let here = grid.linear_cell_of(end.omega.coords()) * cover.box_count() + cover.box_of(&x).expect("inside Q");
        let bucket = phase.bucket(&end.omega);
        if labels.len() >= limit || dist[here * k + bucket] == usize::MAX {
            return Err(LiftError::PathAbsent { from: here, to: goal_node });
        }
        let &(next, label) = edges.succ[here]
            .iter()
            .min_by_key(|(w, l)| {
                let tau = graph.jump_times()[l.time as usize];
                dist[w * k + phase.bucket(&sys.driving().advance(&end.omega, tau))]
            })
            .ok_or(LiftError::PathAbsent { from: here, to: goal_node })?;
        let tau = graph.jump_times()[label.time as usize];
        points.push((end.omega.clone(), x.clone()));
        starts.push(clock);
        durations.push(tau);
        labels.push(label);
        end = solver.psi(tau, &end.omega, &x, &graph.controls()[label.control as usize])?;
        clock += tau;
        intended = Some(grid.linear_cell_of(end.omega.coords()) * cover.box_count() + next % cover.box_count());
    }
    let arrival = clock;
    starts.push(arrival);
    durations.push(lead);
    points.push((s2.omega.clone(), s2.x.clone()));

    // global control: s1's up to the first edge, the edge controls, then s2's shifted
    let mut g = s1.control.clone();
    for (k, l) in labels.iter().enumerate() {
        g = g.concatenate(&graph.controls()[l.control as usize], starts[k + 2]);
    }
    g = g.concatenate(&s2.control.shift(-lead), arrival);

    let n = durations.len();
    let mut links = Vec::with_capacity(n);
    for j in 0..n {
        let source = if j == 0 { s1.control.clone() } else { g.shift(starts[j]) };
        let target = if j + 1 == n { s2.control.clone() } else { g.shift(starts[j + 1]) };
        let (w, x) = &points[j];
        let reached = solver.psi(durations[j], w, x, &source)?;
        let (tw, tx) = &points[j + 1];
        links.push(PhiChainLink {
            source_omega: w.clone(),
            source_x: x.clone(),
            source_offset: starts[j],
            target_omega: tw.clone(),
            target_x: tx.clone(),
            jump_time: durations[j],
            control_distance: weak_star_distance(&source.shift(durations[j]), &target, basis)?,
            state_distance: max_abs_diff(&reached.x, tx),
            driving_distance: torus_distance(reached.omega.coords(), tw.coords()),
        });
    }
    Ok((g, links))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub nodes: ChainSetApprox,
    /// Nodes outside the one-box, one-cell inflation of the source set.
    pub outside: usize,
}

impl Projection {
    pub fn inside(&self) -> bool {
        self.outside == 0
    }
}

/// Nodes visited by the samples and their trajectories on `[-W, W]`.
pub fn project_chain_set(
    samples: &[LiftedSample],
    set: &ChainSetApprox,
    grid: &DrivingGrid,
    cover: &BoxCover,
    sys: &SystemDef,
    cfg: &IntegratorConfig,
) -> Result<Projection, LiftError> {
    if samples.is_empty() {
        return Err(LiftError::BadParams("no samples".into()));
    }
    let inflated = set.inflate(grid, cover, 1, 1);
    let mut nodes = Vec::new();
    let mut outside = 0;
    for s in samples {
        for (_, w, x) in s.trajectory(sys, cfg, -s.window, s.window)? {
            match node_of(grid, cover, &w, &x) {
                Some(n) => nodes.push(n),
                None => outside += 1,
            }
        }
    }
    let nodes = ChainSetApprox::new(nodes, cover.box_count());
    outside += nodes.nodes().iter().filter(|&&n| !inflated.contains(n)).count();
    Ok(Projection { nodes, outside })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cover_graph::{build_chain_graph, chain_control_sets, ChainParams};
    use crate::scenarios::cubic_autonomous;
    use crate::signals::{sample_controls, ControlRange};
    use crate::cocycle::BoxDomain;
    use crate::driving::DrivingFlowSpec;

    struct Band {
        sys: SystemDef,
        cfg: IntegratorConfig,
        graph: ChainGraph,
        set: ChainSetApprox,
    }

    fn band(boxes: usize) -> Band {
        let mut s = cubic_autonomous();
        s.cover = BoxCover::new(s.system.domain().clone(), vec![boxes]).unwrap();
        let controls = sample_controls(s.system.control_range(), s.control_levels).unwrap();
        let params = ChainParams::new(1.0, s.cover.box_diameter());
        let graph = build_chain_graph(&s.system, &s.cover, &s.grid, &params, &controls, &s.integrator).unwrap();
        let set = chain_control_sets(&graph).into_iter().max_by_key(|c| c.len()).unwrap();
        Band { sys: s.system, cfg: s.integrator, graph, set }
    }

    #[test]
    fn samples_stay_in_the_band() {
        let b = band(128);
        let samples = lift_samples(&b.set, &b.graph, &b.sys, &b.cfg, 10.0, 20, 3).unwrap();
        assert_eq!(samples.len(), 20);
        let (g, c) = (b.graph.grid(), b.graph.cover());
        let proj = project_chain_set(&samples, &b.set, g, c, &b.sys, &b.cfg).unwrap();
        assert!(proj.inside(), "{} outside", proj.outside);
        let moved: Vec<_> = samples.iter().map(|s| s.shifted(&b.sys, &b.cfg, 5.0).unwrap()).collect();
        assert!(project_chain_set(&moved, &b.set, g, c, &b.sys, &b.cfg).unwrap().inside());
        for s in &samples {
            assert!(s.anchor_time <= -10.0);
            let again = s.state_at(&b.sys, &b.cfg, 0.0).unwrap();
            assert_eq!(again.x, s.x);
        }
    }

    #[test]
    fn shifted_samples_follow_the_anchor_trajectory() {
        let b = band(128);
        let samples = lift_samples(&b.set, &b.graph, &b.sys, &b.cfg, 10.0, 5, 11).unwrap();
        for s in &samples {
            for t in [-2.0, -1.0, 1.0, 2.0] {
                let moved = s.shifted(&b.sys, &b.cfg, t).unwrap();
                let along = s.state_at(&b.sys, &b.cfg, t).unwrap();
                assert!(max_abs_diff(&moved.x, &along.x) < 1e-6, "t = {t}");
                assert_eq!(moved.window, 10.0 - t.abs());
                let member = b.set.inflate(b.graph.grid(), b.graph.cover(), 1, 1).membership(b.graph.node_count());
                assert!(moved.stays_in(&b.sys, &b.cfg, b.graph.grid(), b.graph.cover(), &member).unwrap());
            }
        }
    }

    #[test]
    fn chains_connect_random_pairs() {
        let b = band(128);
        let samples = lift_samples(&b.set, &b.graph, &b.sys, &b.cfg, 10.0, 12, 5).unwrap();
        let eps = 3.0 * b.graph.cover().box_diameter();
        let basis = MetricBasis::for_period(1, 1.0);
        for i in 0..samples.len() {
            let j = (i * 7 + 3) % samples.len();
            let chain =
                phi_chain_between(&samples[i], &samples[j], eps, 1.0, &b.graph, &b.set, &basis, &b.sys, &b.cfg)
                    .unwrap();
            assert!(chain.max_distance() < eps);
            if i == j {
                assert!(chain.links.is_empty());
            } else {
                assert!(!chain.links.is_empty());
                assert!(chain.links.iter().all(|l| l.jump_time >= 1.0 && l.control_distance < 1e-12));
            }
        }
    }

    #[test]
    fn node_outside_the_set_is_rejected() {
        let b = band(64);
        let outside = b.graph.cover().box_of(&[1.9]).unwrap();
        let member = vec![true; b.graph.node_count()];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let res = lift_at(&b.set, &b.graph, &b.sys, &b.cfg, 5.0, outside, &member, &mut rng);
        assert_eq!(res, Err(LiftError::NotInSet(outside)));
        assert!(matches!(lift_samples(&b.set, &b.graph, &b.sys, &b.cfg, 0.0, 1, 0), Err(LiftError::BadParams(_))));
    }

    #[test]
    fn zero_control_lifts_to_the_equilibrium() {
        let sys = SystemDef::parse(
            DrivingFlowSpec::trivial(),
            ControlRange::new(vec![(0.0, 0.0)]).unwrap(),
            BoxDomain::new(vec![-1.0], vec![1.0]).unwrap(),
            &[vec!["-x1".into()], vec!["1".into()]],
        )
        .unwrap();
        let cover = BoxCover::new(sys.domain().clone(), vec![9]).unwrap();
        let cfg = IntegratorConfig::for_domain(sys.domain(), 0.01);
        let graph = build_chain_graph(
            &sys,
            &cover,
            &DrivingGrid::single(1),
            &ChainParams::new(1.0, cover.box_diameter()),
            &[ControlSignal::zero(1)],
            &cfg,
        )
        .unwrap();
        let sets = chain_control_sets(&graph);
        let set = sets.iter().find(|s| s.contains(cover.box_of(&[0.0]).unwrap())).unwrap();
        let samples = lift_samples(set, &graph, &sys, &cfg, 4.0, 3, 1).unwrap();
        assert!(!samples.is_empty());
        for s in &samples {
            assert!(s.x[0].abs() <= cover.box_diameter());
            assert!(s.control.values().iter().flatten().all(|&v| v == 0.0));
        }
        let proj = project_chain_set(&samples[..1], set, graph.grid(), &cover, &sys, &cfg).unwrap();
        assert_eq!(proj.nodes.nodes(), &[cover.box_of(&[0.0]).unwrap()]);
        let later = samples[0].shifted(&sys, &cfg, 1.0).unwrap();
        let basis = MetricBasis::for_period(1, 1.0);
        let chain =
            phi_chain_between(&samples[0], &later, cover.box_diameter(), 1.0, &graph, set, &basis, &sys, &cfg).unwrap();
        assert_eq!(chain.links.len(), 1);
        assert_eq!(chain.links[0].control_distance, 0.0);
    }
}
