//! One function per analysis subcommand. Each fills `Artifacts` and returns
//! the summary that goes into the manifest plus any property violations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use skewchain_core::cocycle::Solver;
use skewchain_core::control_sets::{
    check_exact_condition, control_set_around, control_set_to, mixing_transfer, pullback_equilibrium, reach_set,
    verify_no_return, EquilibriumTable, MixingConfig, NoReturnConfig, PullbackConfig, ReachMode,
};
use skewchain_core::cover_graph::{
    build_chain_graph, chain_control_sets, export, single_fiber_reconstruct, ChainGraph, ChainSetApprox,
};
use skewchain_core::driving::DrivingPoint;
use skewchain_core::lift::{lift_samples, phi_chain_between, project_chain_set};
use skewchain_core::signals::{sample_controls, ControlSignal, MetricBasis};

use crate::config::Setup;
use crate::error::CliError;
use crate::output::Artifacts;
use crate::plot;

pub struct Outcome {
    pub summary: Value,
    pub violations: Vec<String>,
}

impl Outcome {
    fn ok(summary: Value) -> Self {
        Outcome { summary, violations: Vec::new() }
    }
}

pub fn controls(setup: &Setup) -> Result<Vec<ControlSignal>, CliError> {
    let s = &setup.scenario;
    sample_controls(s.system.control_range(), s.control_levels).map_err(|e| CliError::validation(e.to_string()))
}

pub fn chain_graph(setup: &Setup) -> Result<ChainGraph, CliError> {
    let s = &setup.scenario;
    Ok(build_chain_graph(&s.system, &s.cover, &s.grid, &s.chain, &controls(setup)?, &s.integrator)?)
}

pub fn equilibrium_table(setup: &Setup) -> Result<EquilibriumTable, CliError> {
    let s = &setup.scenario;
    let e = &setup.analysis().equilibrium;
    let config = PullbackConfig {
        horizon: e.horizon,
        max_horizon: e.max_horizon,
        seed: e.seed.clone(),
        tol: e.tol,
        residual_tol: e.residual_tol,
    };
    Ok(pullback_equilibrium(&s.grid, &s.system, &s.integrator, &config)?)
}

fn point_or_origin(v: &Option<Vec<f64>>, p: usize) -> DrivingPoint {
    v.as_ref().map_or_else(|| DrivingPoint::origin(p), |w| DrivingPoint::new(w.clone()))
}

#[derive(Serialize)]
struct SetInfo {
    index: usize,
    nodes: usize,
    cells: usize,
    /// Hull of the box intervals; scalar state only.
    interval: Option<(f64, f64)>,
    members: Vec<usize>,
}

fn set_infos(sets: &[ChainSetApprox], setup: &Setup) -> Vec<SetInfo> {
    let cover = &setup.scenario.cover;
    sets.iter()
        .enumerate()
        .map(|(index, s)| SetInfo {
            index,
            nodes: s.len(),
            cells: s.cells().len(),
            interval: if cover.per_dim().len() == 1 { s.interval(cover) } else { None },
            members: s.nodes().to_vec(),
        })
        .collect()
}

fn write_sets(
    arts: &mut Artifacts,
    setup: &Setup,
    stem: &str,
    title: &str,
    sets: &[ChainSetApprox],
) -> Result<(), CliError> {
    let s = &setup.scenario;
    if setup.wants("csv") {
        let mut buf = Vec::new();
        export::write_set_csv(sets, &s.grid, &s.cover, &mut buf)?;
        arts.add(&format!("{stem}.csv"), buf);
    }
    if setup.wants("plot") {
        arts.add(&format!("{stem}.dat"), plot::chain_sets(title, sets, &s.grid, &s.cover).into_bytes());
    }
    Ok(())
}

pub fn simulate(setup: &Setup, arts: &mut Artifacts) -> Result<Outcome, CliError> {
    let s = &setup.scenario;
    let sys = &s.system;
    let sim = &setup.analysis().simulate;
    let omega = point_or_origin(&sim.omega, sys.driving_dim());
    let x = sim.x.clone().unwrap_or_else(|| {
        let d = sys.domain();
        d.lo().iter().zip(d.hi()).map(|(a, b)| 0.5 * (a + b)).collect()
    });
    let value = sim.control.clone().unwrap_or_else(|| vec![0.0; sys.control_dim()]);
    if !sys.control_range().contains(&value) {
        return Err(CliError::validation(format!("simulate control {value:?} lies outside U")));
    }
    let u = ControlSignal::constant(value);
    let solver = Solver::new(sys, s.integrator.clone());
    let points = solver.trajectory(sim.t, omega.coords(), &x, &u)?;
    arts.mark("integrate");
    let end = points.last().map(|(_, y)| y.clone()).unwrap_or_else(|| x.clone());
    let summary = json!({ "omega": omega, "x0": x, "t": sim.t, "steps": points.len() - 1, "final": end });
    if setup.wants("csv") {
        let mut buf = Vec::new();
        solver.write_trajectory_csv(&mut buf, omega.coords(), &u, &points)?;
        arts.add("trajectory.csv", buf);
    }
    if setup.wants("json") {
        arts.add_json("trajectory.json", &summary)?;
    }
    if setup.wants("plot") {
        let block: Vec<_> = points
            .iter()
            .map(|(t, y)| (*t, sys.driving().advance(&omega, *t).coords().to_vec(), y.clone()))
            .collect();
        let text = plot::trajectories("trajectory", sys.driving_dim(), sys.state_dim(), &[block]);
        arts.add("trajectory.dat", text.into_bytes());
    }
    Ok(Outcome::ok(summary))
}

pub fn chain_sets(setup: &Setup, arts: &mut Artifacts) -> Result<Outcome, CliError> {
    let graph = chain_graph(setup)?;
    arts.mark("graph");
    let sets = chain_control_sets(&graph);
    arts.mark("components");
    let summary = json!({
        "graph": export::summary(&graph),
        "set_count": sets.len(),
        "sets": set_infos(&sets, setup).iter().map(|i| json!({
            "nodes": i.nodes, "cells": i.cells, "interval": i.interval,
        })).collect::<Vec<_>>(),
    });
    if setup.wants("json") {
        arts.add_json("chain_sets.json", &json!({ "graph": export::summary(&graph), "sets": set_infos(&sets, setup) }))?;
    }
    if setup.wants("edges") {
        let mut buf = Vec::new();
        export::write_edge_list(&graph, &mut buf)?;
        arts.add("graph.chgr", buf);
    }
    write_sets(arts, setup, "chain_sets", "chain control sets", &sets)?;
    Ok(Outcome::ok(summary))
}

pub fn single_fiber(setup: &Setup, arts: &mut Artifacts) -> Result<Outcome, CliError> {
    let s = &setup.scenario;
    let omega0 = point_or_origin(&setup.analysis().single_fiber.omega0, s.system.driving_dim());
    let controls = controls(setup)?;
    let sf = single_fiber_reconstruct(&s.system, &s.cover, &s.grid, &omega0, &s.chain, &controls, &s.integrator)?;
    arts.mark("single-fiber");
    let direct = chain_control_sets(&chain_graph(setup)?);
    arts.mark("direct");
    let inflated: Vec<_> = direct.iter().map(|e| e.eps_inflate(&s.grid, &s.cover, s.chain.eps)).collect();
    let components: Vec<Value> = sf
        .components
        .iter()
        .map(|c| {
            json!({
                "fiber_boxes": c.fiber.len(),
                "nodes": c.set.len(),
                "mutually_reachable": c.mutually_reachable,
                "inside_direct_inflation": inflated.iter().any(|e| c.set.is_subset_of(e)),
            })
        })
        .collect();
    let summary = json!({
        "omega0": omega0,
        "start_cell": sf.start_cell,
        "return_cells": sf.return_cells,
        "aux_edges": sf.aux.edge_count(),
        "direct_sets": direct.len(),
        "components": components,
    });
    if setup.wants("json") {
        arts.add_json("single_fiber.json", &json!({ "summary": summary, "components": sf.components }))?;
    }
    let sets: Vec<ChainSetApprox> = sf.components.iter().map(|c| c.set.clone()).collect();
    write_sets(arts, setup, "single_fiber", "single-fiber reconstruction", &sets)?;
    Ok(Outcome::ok(summary))
}

pub fn equilibrium(setup: &Setup, arts: &mut Artifacts) -> Result<Outcome, CliError> {
    let table = equilibrium_table(setup)?;
    arts.mark("pullback");
    let summary = json!({
        "horizon": table.horizon,
        "cells": table.cell_count(),
        "max_residual": table.max_residual(),
        "change": table.change,
    });
    if setup.wants("json") {
        arts.add_json("equilibrium.json", &table)?;
    }
    if setup.wants("csv") {
        let mut buf = Vec::new();
        table.write_csv(&mut buf)?;
        arts.add("equilibrium.csv", buf);
    }
    if setup.wants("plot") {
        arts.add("equilibrium.dat", plot::equilibrium(&table).into_bytes());
    }
    Ok(Outcome::ok(summary))
}

pub fn control_sets(setup: &Setup, arts: &mut Artifacts) -> Result<Outcome, CliError> {
    let s = &setup.scenario;
    let sys = &s.system;
    let cs = &setup.analysis().control_sets;
    let table = equilibrium_table(setup)?;
    arts.mark("pullback");
    let scalar = sys.state_dim() == 1;
    let condition = if scalar {
        Some(check_exact_condition(&table, cs.condition_eps, cs.condition_t, sys, &s.integrator)?)
    } else {
        None
    };
    arts.mark("condition");
    let t = cs.t.unwrap_or(s.chain.t);
    let d = control_set_around(&table, sys, &controls(setup)?, t, &s.integrator, &s.cover, &s.grid)?;
    arts.mark("control-set");
    let config = NoReturnConfig { samples: cs.no_return_samples, seed: cs.seed, ..NoReturnConfig::default() };
    let no_return = verify_no_return(&d.set, &s.grid, &s.cover, sys, &s.integrator, &config)?;
    arts.mark("no-return");

    // reach and controllable intervals around the equilibrium over the first cell
    let mut forward = Vec::new();
    let mut backward = Vec::new();
    if scalar {
        let w = s.grid.center(0);
        for &h in &cs.fan_times {
            let r = reach_set(&w, &table.values[0], h, sys, &s.integrator, &ReachMode::ExactScalar)?;
            let c = control_set_to(&w, &table.values[0], h, sys, &s.integrator, &ReachMode::ExactScalar)?;
            if let (Some((a, b)), Some((p, q))) = (r.interval(), c.interval()) {
                forward.push((h, a, b));
                backward.push((h, p, q));
            }
        }
        arts.mark("fan");
    }
    let summary = json!({
        "nodes": d.set.len(),
        "interval": if scalar { d.set.interval(&s.cover) } else { None },
        "interior": d.interior,
        "seeds_connected": d.seeds_connected,
        "seed_only": d.seed_only,
        "condition_passes": condition.as_ref().map(|c| c.all_pass()),
        "eps_passing": condition.as_ref().and_then(|c| c.eps_passing),
        "no_return": no_return,
    });
    if setup.wants("json") {
        arts.add_json(
            "control_sets.json",
            &json!({
                "summary": summary,
                "control_set": d,
                "condition": condition,
                "reach_fan": forward,
                "controllable_fan": backward,
            }),
        )?;
    }
    write_sets(arts, setup, "control_set", "control set around the equilibrium", std::slice::from_ref(&d.set))?;
    if setup.wants("plot") && scalar {
        arts.add("reach_fan.dat", plot::reach_fan("reach intervals R_T over the first cell", &forward).into_bytes());
        arts.add(
            "controllable_fan.dat",
            plot::reach_fan("controllable intervals C_T over the first cell", &backward).into_bytes(),
        );
    }
    Ok(Outcome::ok(summary))
}

/// Largest chain control set; small artifact components are ignored.
pub fn largest_set(graph: &ChainGraph) -> Result<ChainSetApprox, CliError> {
    chain_control_sets(graph)
        .into_iter()
        .max_by_key(ChainSetApprox::len)
        .ok_or_else(|| CliError::numerical("no chain control set"))
}

pub struct LiftRun {
    pub summary: Value,
    pub violations: Vec<String>,
}

pub fn run_lift(setup: &Setup, arts: &mut Artifacts, emit: bool) -> Result<LiftRun, CliError> {
    let s = &setup.scenario;
    let sys = &s.system;
    let l = &setup.analysis().lift;
    let graph = chain_graph(setup)?;
    let set = largest_set(&graph)?;
    arts.mark("graph");
    let window = l.window.unwrap_or(10.0 * s.chain.t);
    let eps = l.eps.unwrap_or(3.0 * s.cover.box_diameter());
    let basis = match l.basis_window {
        Some(w) => MetricBasis::dyadic(sys.control_dim(), w, 4),
        None => MetricBasis::for_period(sys.control_dim(), s.chain.t),
    };
    let samples = lift_samples(&set, &graph, sys, &s.integrator, window, l.samples, l.seed)?;
    arts.mark("samples");
    let mut violations = Vec::new();
    if samples.len() < l.samples {
        violations.push(format!("only {} of {} samples certified", samples.len(), l.samples));
    }
    let mut chains = Vec::new();
    let mut worst = 0.0f64;
    if !samples.is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(l.seed.wrapping_add(1));
        for k in 0..l.pairs {
            let (i, j) = (rng.gen_range(0..samples.len()), rng.gen_range(0..samples.len()));
            match phi_chain_between(&samples[i], &samples[j], eps, s.chain.t, &graph, &set, &basis, sys, &s.integrator) {
                Ok(c) => {
                    worst = worst.max(c.max_distance());
                    chains.push(json!({ "pair": [i, j], "links": c.links.len(), "max_distance": c.max_distance() }));
                }
                Err(e) => {
                    violations.push(format!("pair {k} ({i}, {j}): {e}"));
                    chains.push(json!({ "pair": [i, j], "error": e.to_string() }));
                }
            }
        }
    }
    arts.mark("chains");
    let outside = if samples.is_empty() {
        None
    } else {
        let proj = project_chain_set(&samples, &set, &s.grid, &s.cover, sys, &s.integrator)?;
        if !proj.inside() {
            violations.push(format!("{} projected nodes outside the inflated set", proj.outside));
        }
        Some(proj.outside)
    };
    arts.mark("projection");
    let summary = json!({
        "set_nodes": set.len(),
        "window": window,
        "eps": eps,
        "basis_window": basis.window(),
        "samples": samples.len(),
        "chains_ok": chains.iter().filter(|c| c.get("error").is_none()).count(),
        "chains": l.pairs,
        "max_link_distance": worst,
        "projected_outside": outside,
    });
    if emit {
        if setup.wants("json") {
            let sample_rows: Vec<Value> = samples
                .iter()
                .map(|p| json!({ "node": p.node, "omega": p.omega, "x": p.x, "window": p.window }))
                .collect();
            arts.add_json("lift.json", &json!({ "summary": summary, "samples": sample_rows, "chains": chains }))?;
        }
        if setup.wants("plot") {
            let mut blocks = Vec::new();
            for p in &samples {
                let traj = p.trajectory(sys, &s.integrator, -p.window, p.window)?;
                let stride = traj.len().div_ceil(400).max(1);
                blocks.push(
                    traj.iter().step_by(stride).map(|(t, w, x)| (*t, w.coords().to_vec(), x.clone())).collect(),
                );
            }
            let text = plot::trajectories("lifted samples on [-W, W]", sys.driving_dim(), sys.state_dim(), &blocks);
            arts.add("lift.dat", text.into_bytes());
        }
    }
    Ok(LiftRun { summary, violations })
}

pub fn lift_verify(setup: &Setup, arts: &mut Artifacts) -> Result<Outcome, CliError> {
    let run = run_lift(setup, arts, true)?;
    Ok(Outcome { summary: run.summary, violations: run.violations })
}

pub fn mixing(setup: &Setup, arts: &mut Artifacts) -> Result<Outcome, CliError> {
    let s = &setup.scenario;
    let sys = &s.system;
    let m = &setup.analysis().mixing;
    let table = equilibrium_table(setup)?;
    arts.mark("pullback");
    let (w1, w2) = (DrivingPoint::new(m.omega1.clone()), DrivingPoint::new(m.omega2.clone()));
    let a1 = table.alpha_at(sys, &s.integrator, &w1)?;
    let a2 = table.alpha_at(sys, &s.integrator, &w2)?;
    let y1 = vec![m.y1.unwrap_or(a1[0] + m.y1_offset)];
    let y2 = vec![m.y2.unwrap_or(a2[0] + m.y2_offset)];
    let config = MixingConfig { s_max: m.s_max, ..MixingConfig::new(m.t, m.eps) };
    let tr = mixing_transfer(&w1, &y1, &w2, &y2, m.eps0, &table, sys, &s.integrator, m.delta, &config)?;
    arts.mark("transfer");
    let summary = json!({
        "y1": y1,
        "y2": y2,
        "coast_time": tr.coast_time,
        "total_time": tr.total_time,
        "hit_error": tr.hit_error,
        "driving_error": tr.driving_error,
    });
    if setup.wants("json") {
        arts.add_json("mixing.json", &tr)?;
    }
    if setup.wants("csv") || setup.wants("plot") {
        let solver = Solver::new(sys, s.integrator.clone());
        let points = solver.trajectory(tr.total_time, w1.coords(), &y1, &tr.control)?;
        if setup.wants("csv") {
            let mut buf = Vec::new();
            solver.write_trajectory_csv(&mut buf, w1.coords(), &tr.control, &points)?;
            arts.add("mixing.csv", buf);
        }
        if setup.wants("plot") {
            let stride = points.len().div_ceil(2000).max(1);
            let block: Vec<_> = points
                .iter()
                .step_by(stride)
                .map(|(t, y)| (*t, sys.driving().advance(&w1, *t).coords().to_vec(), y.clone()))
                .collect();
            arts.add(
                "mixing.dat",
                plot::trajectories("mixing transfer", sys.driving_dim(), sys.state_dim(), &[block]).into_bytes(),
            );
        }
    }
    Ok(Outcome::ok(summary))
}
