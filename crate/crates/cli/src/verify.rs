//! The invariant suites behind `verify`. Every suite reports pass, fail or
//! skipped with a one-line detail; a failing suite is a property violation.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use skewchain_core::cocycle::{BoxDomain, IntegrationError, IntegratorConfig, Solver, SystemDef};
use skewchain_core::control_sets::{control_set_around, mixing_transfer, verify_no_return, MixingConfig, NoReturnConfig};
use skewchain_core::cover_graph::{
    build_chain_graph, chain_control_sets, required_eps, single_fiber_reconstruct, strongly_connected_components,
    BoxCover, ChainParams, ChainSetApprox, Csr,
};
use skewchain_core::driving::{DrivingFlowSpec, DrivingPoint};
use skewchain_core::signals::{random_signal, weak_star_distance, ControlRange, ControlSignal, MetricBasis, TestFunction};

use crate::commands::{chain_graph, controls, equilibrium_table, run_lift};
use crate::config::Setup;
use crate::output::Artifacts;

#[derive(Clone, Debug, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub status: &'static str,
    pub detail: String,
}

type Check = Result<String, String>;

/// Name, reason to skip, and the check itself.
type Suite<'a> = (&'static str, Option<&'static str>, Box<dyn Fn() -> Check + 'a>);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: ToString>(e: E) -> String {
    e.to_string()
}

/// Largest `|x|` along the trajectory on `[0, t]`.
fn peak(solver: &Solver, t: f64, omega: &DrivingPoint, x: &[f64], u: &ControlSignal) -> Result<f64, IntegrationError> {
    let points = solver.trajectory(t, omega.coords(), x, u)?;
    Ok(points.iter().flat_map(|(_, y)| y.iter().map(|v| v.abs())).fold(0.0, f64::max))
}

fn cocycle(setup: &Setup) -> Check {
    let s = &setup.scenario;
    let v = &setup.analysis().verify;
    let h = s.integrator.step.min(1e-3);
    let solver = Solver::new(&s.system, IntegratorConfig { step: h, ..s.integrator.clone() });
    let q = s.system.domain();
    let reach = q.inflated().lo().iter().chain(q.inflated().hi()).fold(0.0f64, |m, v| m.max(v.abs()));
    let mut rng = ChaCha8Rng::seed_from_u64(v.seed);
    let (mut worst, mut done, mut redrawn) = (0.0f64, 0, 0);
    while done < v.draws {
        if redrawn > 100 * v.draws {
            return Err(format!("only {done} of {} draws stay in the inflated domain", v.draws));
        }
        let (t, sv) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let omega = DrivingPoint::new((0..s.system.driving_dim()).map(|_| rng.gen::<f64>()).collect::<Vec<_>>());
        let x: Vec<f64> = q.lo().iter().zip(q.hi()).map(|(a, b)| rng.gen_range(*a..*b)).collect();
        let u = random_signal(s.system.control_range(), -4.0, 4.0, 6, &mut rng);
        let inside = peak(&solver, t, &omega, &x, &u).and_then(|a| Ok(a.max(peak(&solver, t + sv, &omega, &x, &u)?)));
        match inside {
            Ok(p) if p <= reach => {}
            Ok(_) | Err(IntegrationError::Escape { .. }) => {
                redrawn += 1;
                continue;
            }
            Err(e) => return Err(e.to_string()),
        }
        worst = worst.max(solver.cocycle_residual(t, sv, &omega, &x, &u).map_err(err)?);
        done += 1;
    }
    ensure(worst < 1e-6, || format!("max residual {worst:.3e}"))?;
    Ok(format!("max residual {worst:.2e} over {done} draws at h = {h} ({redrawn} redrawn)"))
}

/// Fourth-order convergence on `ẋ = -x³`, whose solution is known in closed form.
fn integrator_order() -> Check {
    let sys = SystemDef::parse(
        DrivingFlowSpec::trivial(),
        ControlRange::new(vec![(0.0, 0.0)]).map_err(err)?,
        BoxDomain::new(vec![-2.0], vec![2.0]).map_err(err)?,
        &[vec!["-x1^3".into()], vec!["1".into()]],
    )
    .map_err(err)?;
    let mut errors = Vec::new();
    for h in [1e-2, 5e-3, 2.5e-3] {
        let solver = Solver::new(&sys, IntegratorConfig::for_domain(sys.domain(), h));
        let x = solver.phi(1.5, &[0.0], &[1.0], &ControlSignal::zero(1)).map_err(err)?;
        errors.push((x[0] - 0.5).abs());
    }
    let ratios = [errors[0] / errors[1], errors[1] / errors[2]];
    ensure(ratios.iter().all(|r| (12.0..=20.0).contains(r)), || format!("ratios {ratios:?}"))?;
    Ok(format!("error ratios {:.2}, {:.2}", ratios[0], ratios[1]))
}

fn metric(setup: &Setup) -> Check {
    let v = &setup.analysis().verify;
    let range = setup.scenario.system.control_range();
    let basis = MetricBasis::for_period(range.channels(), setup.scenario.chain.t);
    let mut rng = ChaCha8Rng::seed_from_u64(v.seed);
    let d = |a: &ControlSignal, b: &ControlSignal| weak_star_distance(a, b, &basis).map_err(err);
    for k in 0..v.draws {
        let [u, w, z] = [0, 1, 2].map(|_| random_signal(range, -4.0, 4.0, 8, &mut rng));
        let (uw, wu, wz, uz) = (d(&u, &w)?, d(&w, &u)?, d(&w, &z)?, d(&u, &z)?);
        ensure(uw >= 0.0 && d(&u, &u)? == 0.0, || format!("triple {k}: positivity"))?;
        ensure((uw - wu).abs() <= 1e-12, || format!("triple {k}: symmetry"))?;
        ensure(uz <= uw + wz + 1e-12, || format!("triple {k}: triangle inequality"))?;
    }
    let single = MetricBasis::new(1, vec![TestFunction::indicator(0.0, 1.0, vec![1.0])]).map_err(err)?;
    let example = weak_star_distance(&ControlSignal::constant(vec![1.0]), &ControlSignal::zero(1), &single).map_err(err)?;
    ensure(example == 0.25, || format!("single-function example gave {example}"))?;
    Ok(format!("axioms on {} triples; single-function example 0.25", v.draws))
}

/// Mutual-reachability classes by brute force, independent of the graph code.
fn closure_classes(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let reach: Vec<Vec<bool>> = (0..n)
        .map(|v| {
            let mut r = vec![false; n];
            let mut todo = vec![v];
            r[v] = true;
            while let Some(a) = todo.pop() {
                for &b in &adj[a] {
                    if !r[b] {
                        r[b] = true;
                        todo.push(b);
                    }
                }
            }
            r
        })
        .collect();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for v in 0..n {
        if seen[v] {
            continue;
        }
        let class: Vec<usize> = (v..n).filter(|&w| reach[v][w] && reach[w][v]).collect();
        for &w in &class {
            seen[w] = true;
        }
        out.push(class);
    }
    out.sort();
    out
}

fn scc(setup: &Setup) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(setup.analysis().verify.seed);
    for k in 0..50 {
        let n = rng.gen_range(1..=200);
        let p = (rng.gen_range(0.5..3.0) / n as f64).min(1.0);
        let adj: Vec<Vec<usize>> = (0..n).map(|_| (0..n).filter(|_| rng.gen_bool(p)).collect()).collect();
        let mut got = strongly_connected_components(&Csr::from_adjacency(&adj));
        for c in &mut got {
            c.sort_unstable();
        }
        got.sort();
        ensure(got == closure_classes(&adj), || format!("graph {k} ({n} nodes) differs from the closure classes"))?;
    }
    Ok("50 random graphs match the transitive-closure classes".into())
}

/// Every set is exactly the forward-and-backward closure of its first node.
fn chain_sets(setup: &Setup) -> Check {
    let g = chain_graph(setup).map_err(err)?;
    let sets = chain_control_sets(&g);
    let transpose = g.csr().transpose();
    for (i, set) in sets.iter().enumerate() {
        let a = set.nodes()[0];
        let (fwd, bwd) = (g.csr().reachable_from([a]), transpose.reachable_from([a]));
        let class: Vec<usize> = (0..g.node_count()).filter(|&v| fwd[v] && bwd[v]).collect();
        ensure(class == set.nodes(), || format!("set {i} is not a mutual-reachability class"))?;
        ensure(set.has_internal_edges(&g), || format!("set {i} has no internal edge"))?;
    }
    Ok(format!("{} sets, each a nontrivial mutual-reachability class", sets.len()))
}

fn graph_at(setup: &Setup, cover: &BoxCover, eps: f64) -> Result<skewchain_core::ChainGraph, String> {
    let s = &setup.scenario;
    let params = ChainParams { eps, ..s.chain.clone() };
    let controls = controls(setup).map_err(err)?;
    build_chain_graph(&s.system, cover, &s.grid, &params, &controls, &s.integrator).map_err(err)
}

fn monotonicity(setup: &Setup) -> Check {
    let s = &setup.scenario;
    let (g1, g2) = (graph_at(setup, &s.cover, s.chain.eps)?, graph_at(setup, &s.cover, 2.0 * s.chain.eps)?);
    let missing = g1.edge_list().filter(|&(v, w, _)| !g2.has_edge(v, w)).count();
    ensure(missing == 0, || format!("{missing} edges at eps missing at 2 eps"))?;
    let (a, b) = (chain_control_sets(&g1), chain_control_sets(&g2));
    ensure(a.iter().all(|x| b.iter().any(|y| x.is_subset_of(y))), || "a set at eps is not inside one at 2 eps".into())?;
    Ok(format!("{} -> {} edges, {} -> {} sets", g1.edge_count(), g2.edge_count(), a.len(), b.len()))
}

/// Fine node to the coarse node two boxes per axis map into.
fn coarsen(set: &ChainSetApprox, fine: &BoxCover, coarse: &BoxCover) -> HashSet<usize> {
    set.nodes()
        .iter()
        .map(|&n| {
            let (c, b) = (n / fine.box_count(), n % fine.box_count());
            let idx: Vec<usize> = fine.multi_index(b).iter().map(|i| i / 2).collect();
            c * coarse.box_count() + coarse.linear_index(&idx)
        })
        .collect()
}

fn refinement(setup: &Setup) -> Check {
    let s = &setup.scenario;
    let fine = BoxCover::new(s.cover.domain().clone(), s.cover.per_dim().iter().map(|n| 2 * n).collect()).map_err(err)?;
    let fine_eps = (0.5 * s.chain.eps).max(required_eps(&s.system, &fine, &s.grid));
    let coarse_sets = chain_control_sets(&graph_at(setup, &s.cover, s.chain.eps)?);
    let fine_sets = chain_control_sets(&graph_at(setup, &fine, fine_eps)?);
    let all = ChainSetApprox::new(coarse_sets.iter().flat_map(|c| c.nodes().iter().copied()).collect(), s.cover.box_count());
    let inflated = all.inflate(&s.grid, &s.cover, 0, 1);
    let outside: usize =
        fine_sets.iter().map(|f| coarsen(f, &fine, &s.cover).iter().filter(|&&n| !inflated.contains(n)).count()).sum();
    ensure(outside == 0, || format!("{outside} refined nodes outside the one-box inflation"))?;
    Ok(format!("{} fine sets inside the one-box inflation of {} coarse sets", fine_sets.len(), coarse_sets.len()))
}

fn single_fiber(setup: &Setup) -> Check {
    let s = &setup.scenario;
    let omega0 = setup.analysis().single_fiber.omega0.clone().map_or_else(
        || DrivingPoint::origin(s.system.driving_dim()),
        DrivingPoint::new,
    );
    let direct = chain_control_sets(&chain_graph(setup).map_err(err)?);
    let controls = controls(setup).map_err(err)?;
    let sf = single_fiber_reconstruct(&s.system, &s.cover, &s.grid, &omega0, &s.chain, &controls, &s.integrator)
        .map_err(err)?;
    ensure(!sf.components.is_empty(), || "no component".into())?;
    let inflated: Vec<_> = direct.iter().map(|e| e.eps_inflate(&s.grid, &s.cover, s.chain.eps)).collect();
    for (i, c) in sf.components.iter().enumerate() {
        ensure(inflated.iter().any(|e| c.set.is_subset_of(e)), || format!("component {i} outside the eps-inflation"))?;
        ensure(c.mutually_reachable, || format!("component {i} not mutually reachable"))?;
    }
    Ok(format!("{} components inside the eps-inflation, mutually reachable", sf.components.len()))
}

fn equilibrium(setup: &Setup) -> Check {
    let e = &setup.analysis().equilibrium;
    let table = equilibrium_table(setup).map_err(err)?;
    ensure(table.max_residual() < e.residual_tol && table.change < e.tol, || {
        format!("residual {:.2e}, change {:.2e}", table.max_residual(), table.change)
    })?;
    Ok(format!("H = {}, residual {:.2e}, change {:.2e}", table.horizon, table.max_residual(), table.change))
}

fn control_sets(setup: &Setup) -> Check {
    let s = &setup.scenario;
    let cs = &setup.analysis().control_sets;
    let table = equilibrium_table(setup).map_err(err)?;
    let controls = controls(setup).map_err(err)?;
    let t = cs.t.unwrap_or(s.chain.t);
    let d = control_set_around(&table, &s.system, &controls, t, &s.integrator, &s.cover, &s.grid).map_err(err)?;
    ensure(d.seeds_connected, || "equilibrium seeds are not mutually reachable".into())?;
    let config = NoReturnConfig { samples: cs.no_return_samples, seed: cs.seed, ..NoReturnConfig::default() };
    let rep = verify_no_return(&d.set, &s.grid, &s.cover, &s.system, &s.integrator, &config).map_err(err)?;
    ensure(rep.violations == 0, || format!("{} of {} trajectories leave and return", rep.violations, rep.checked))?;
    Ok(format!("{} nodes, interior {}, no return on {} trajectories", d.set.len(), d.interior, rep.checked))
}

fn lift(setup: &Setup) -> Check {
    let mut scratch = Artifacts::default();
    let run = run_lift(setup, &mut scratch, false).map_err(err)?;
    if let Some(v) = run.violations.first() {
        return Err(format!("{} violations, first: {v}", run.violations.len()));
    }
    Ok(format!(
        "{} samples, {} chains, max link distance {:.2e}",
        run.summary["samples"], run.summary["chains_ok"], run.summary["max_link_distance"].as_f64().unwrap_or(0.0)
    ))
}

fn mixing(setup: &Setup) -> Check {
    let s = &setup.scenario;
    let m = &setup.analysis().mixing;
    let table = equilibrium_table(setup).map_err(err)?;
    let config = MixingConfig { s_max: m.s_max, ..MixingConfig::new(m.t, m.eps) };
    let mut rng = ChaCha8Rng::seed_from_u64(setup.analysis().verify.seed);
    let p = s.system.driving_dim();
    let mut worst = 0.0f64;
    for k in 0..5 {
        let [w1, w2] = [0, 1].map(|_| DrivingPoint::new((0..p).map(|_| rng.gen::<f64>()).collect::<Vec<_>>()));
        let a1 = table.alpha_at(&s.system, &s.integrator, &w1).map_err(err)?;
        let a2 = table.alpha_at(&s.system, &s.integrator, &w2).map_err(err)?;
        let y1 = [a1[0] + rng.gen_range(-0.9..0.9) * m.eps];
        let y2 = [a2[0] + rng.gen_range(-0.9..0.9) * m.eps0];
        let tr = mixing_transfer(&w1, &y1, &w2, &y2, m.eps0, &table, &s.system, &s.integrator, m.delta, &config)
            .map_err(|e| format!("pair {k}: {e}"))?;
        worst = worst.max(tr.hit_error);
    }
    ensure(worst < 1e-6, || format!("hit error {worst:.2e}"))?;
    Ok(format!("5 transfers, max hit error {worst:.2e}"))
}

/// Runs every suite that applies to the configured system.
pub fn run(setup: &Setup, arts: &mut Artifacts) -> Vec<SuiteResult> {
    let a = setup.analysis();
    let sys = &setup.scenario.system;
    let scalar = sys.state_dim() == 1;
    let single_control = sys.control_dim() == 1;
    let suites: Vec<Suite> = vec![
        ("cocycle", None, Box::new(|| cocycle(setup))),
        ("integrator-order", None, Box::new(integrator_order)),
        ("metric", None, Box::new(|| metric(setup))),
        ("scc", None, Box::new(|| scc(setup))),
        ("chain-sets", (!a.chain_sets.enabled).then_some("disabled"), Box::new(|| chain_sets(setup))),
        ("monotonicity", (!a.chain_sets.enabled).then_some("disabled"), Box::new(|| monotonicity(setup))),
        (
            "refinement",
            (!a.verify.refinement || !a.chain_sets.enabled).then_some("disabled"),
            Box::new(|| refinement(setup)),
        ),
        ("single-fiber", (!a.single_fiber.enabled).then_some("disabled"), Box::new(|| single_fiber(setup))),
        ("equilibrium", (!a.equilibrium.enabled).then_some("disabled"), Box::new(|| equilibrium(setup))),
        (
            "control-sets",
            if !a.control_sets.enabled {
                Some("disabled")
            } else if !a.equilibrium.enabled {
                Some("needs the equilibrium")
            } else {
                None
            },
            Box::new(|| control_sets(setup)),
        ),
        ("lift", (!a.lift.enabled).then_some("disabled"), Box::new(|| lift(setup))),
        (
            "mixing",
            if !a.mixing.enabled {
                Some("disabled")
            } else if !(scalar && single_control) {
                Some("needs one state and one control channel")
            } else if !a.equilibrium.enabled {
                Some("needs the equilibrium")
            } else {
                None
            },
            Box::new(|| mixing(setup)),
        ),
    ];
    let mut out = Vec::new();
    for (name, skip, check) in suites {
        let result = match skip {
            Some(reason) => SuiteResult { name, status: "skipped", detail: reason.into() },
            None => match check() {
                Ok(detail) => SuiteResult { name, status: "pass", detail },
                Err(detail) => SuiteResult { name, status: "fail", detail },
            },
        };
        arts.mark(name);
        out.push(result);
    }
    out
}
