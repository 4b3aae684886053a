//! Acceptance run: one line per criterion, nonzero exit if any fails.

use std::collections::HashSet;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use skewchain_core::cocycle::{BoxDomain, IntegrationError, IntegratorConfig, Solver, SystemDef};
use skewchain_core::control_sets::{
    check_exact_condition, control_set_around, mixing_transfer, pullback_equilibrium, MixingConfig, PullbackConfig,
};
use skewchain_core::cover_graph::{
    build_chain_graph, chain_control_sets, single_fiber_reconstruct, strongly_connected_components, BoxCover,
    ChainGraph, ChainParams, ChainSetApprox, Csr,
};
use skewchain_core::driving::{DrivingFlowSpec, DrivingPoint};
use skewchain_core::lift::{lift_samples, phi_chain_between, project_chain_set};
use skewchain_core::scenarios::{self, Scenario};
use skewchain_core::signals::{
    random_signal, sample_controls, weak_star_distance, ControlRange, ControlSignal, MetricBasis, TestFunction,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn graph_of(s: &Scenario, eps: f64) -> Result<ChainGraph, String> {
    let controls = sample_controls(s.system.control_range(), s.control_levels).map_err(|e| e.to_string())?;
    let params = ChainParams { eps, ..s.chain.clone() };
    build_chain_graph(&s.system, &s.cover, &s.grid, &params, &controls, &s.integrator).map_err(|e| e.to_string())
}

fn random_omega<R: Rng>(p: usize, rng: &mut R) -> DrivingPoint {
    DrivingPoint::new((0..p).map(|_| rng.gen::<f64>()).collect::<Vec<_>>())
}

const CBRT_HALF: f64 = 0.793_700_525_984_099_7;

/// Largest `|x|` along `φ(·, ω, x, u)` between 0 and `t`.
fn peak(solver: &Solver, t: f64, omega: &DrivingPoint, x: &[f64], u: &ControlSignal) -> Result<f64, IntegrationError> {
    let points = solver.trajectory(t, omega.coords(), x, u)?;
    Ok(points.iter().flat_map(|(_, y)| y.iter().map(|v| v.abs())).fold(0.0, f64::max))
}

fn cocycle_law() -> Outcome {
    let s = scenarios::cubic_hull();
    let solver = Solver::new(&s.system, IntegratorConfig::for_domain(s.system.domain(), 1e-3));
    // the field is specified on Q inflated by 10%
    let reach = 1.1 * 3.0;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst, mut done, mut redrawn) = (0.0f64, 0, 0);
    while done < 1000 {
        let t = rng.gen_range(-2.0..2.0);
        let sv = rng.gen_range(-2.0..2.0);
        let omega = random_omega(2, &mut rng);
        let x = [rng.gen_range(-3.0..3.0)];
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
        worst = worst.max(solver.cocycle_residual(t, sv, &omega, &x, &u).map_err(|e| e.to_string())?);
        done += 1;
    }
    ensure(worst < 1e-6, || format!("max residual {worst:.3e}"))?;
    Ok(format!("max residual {worst:.2e} over 1000 draws ({redrawn} draws leaving the inflated domain redrawn)"))
}

fn integrator_order() -> Outcome {
    let sys = SystemDef::parse(
        DrivingFlowSpec::trivial(),
        ControlRange::new(vec![(0.0, 0.0)]).unwrap(),
        BoxDomain::new(vec![-2.0], vec![2.0]).unwrap(),
        &[vec!["-x1^3".into()], vec!["1".into()]],
    )
    .map_err(|e| e.to_string())?;
    let mut errors = Vec::new();
    for h in [1e-2, 5e-3, 2.5e-3] {
        let solver = Solver::new(&sys, IntegratorConfig::for_domain(sys.domain(), h));
        let x = solver.phi(1.5, &[0.0], &[1.0], &ControlSignal::zero(1)).map_err(|e| e.to_string())?;
        errors.push((x[0] - 0.5).abs());
    }
    let ratios = [errors[0] / errors[1], errors[1] / errors[2]];
    ensure(ratios.iter().all(|r| (12.0..=20.0).contains(r)), || format!("ratios {ratios:?}, errors {errors:?}"))?;
    Ok(format!("error ratios {:.2}, {:.2}", ratios[0], ratios[1]))
}

fn autonomous_baseline() -> Outcome {
    let s = scenarios::cubic_autonomous();
    let delta = s.cover.box_diameter();
    let g = graph_of(&s, s.chain.eps)?;
    let sets = chain_control_sets(&g);
    ensure(sets.len() == 1, || format!("{} chain control sets", sets.len()))?;
    let (lo, hi) = sets[0].interval(&s.cover).ok_or("empty set")?;
    ensure((lo + CBRT_HALF).abs() <= 2.0 * delta && (hi - CBRT_HALF).abs() <= 2.0 * delta, || {
        format!("chain set interval ({lo}, {hi})")
    })?;

    let config = PullbackConfig { seed: Some(vec![0.0]), ..PullbackConfig::default() };
    let table = pullback_equilibrium(&s.grid, &s.system, &s.integrator, &config).map_err(|e| e.to_string())?;
    ensure(table.values[0][0].abs() < 1e-8, || format!("alpha = {}", table.values[0][0]))?;
    let controls = sample_controls(s.system.control_range(), s.control_levels).unwrap();
    let d = control_set_around(&table, &s.system, &controls, s.chain.t, &s.integrator, &s.cover, &s.grid)
        .map_err(|e| e.to_string())?;
    let (dlo, dhi) = d.set.interval(&s.cover).ok_or("empty control set")?;
    ensure((dlo + CBRT_HALF).abs() <= 2.0 * delta && (dhi - CBRT_HALF).abs() <= 2.0 * delta, || {
        format!("control set interval ({dlo}, {dhi})")
    })?;
    let zero = s.cover.box_of(&[0.0]).unwrap();
    ensure(d.interior && d.set.contains(zero) && d.set.contains(zero - 1) && d.set.contains(zero + 1), || {
        "alpha = 0 is not interior".into()
    })?;
    Ok(format!("one chain set ({lo:.4}, {hi:.4}); control set ({dlo:.4}, {dhi:.4}) with 0 interior"))
}

#[allow(clippy::needless_range_loop)]
fn closure_classes(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut r = vec![vec![false; n]; n];
    for (i, row) in adj.iter().enumerate() {
        r[i][i] = true;
        for &j in row {
            r[i][j] = true;
        }
    }
    for k in 0..n {
        for i in 0..n {
            if r[i][k] {
                for j in 0..n {
                    if r[k][j] {
                        r[i][j] = true;
                    }
                }
            }
        }
    }
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for i in 0..n {
        if !seen[i] {
            let class: Vec<usize> = (0..n).filter(|&j| r[i][j] && r[j][i]).collect();
            class.iter().for_each(|&j| seen[j] = true);
            out.push(class);
        }
    }
    out
}

fn scc_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for k in 0..50 {
        let n = rng.gen_range(1..=200);
        let p = rng.gen_range(0.5..3.0) / n as f64;
        let adj: Vec<Vec<usize>> = (0..n).map(|_| (0..n).filter(|_| rng.gen_bool(p.min(1.0))).collect()).collect();
        let got = strongly_connected_components(&Csr::from_adjacency(&adj));
        ensure(got == closure_classes(&adj), || format!("graph {k} with {n} nodes differs"))?;
    }
    Ok("50 random graphs match the transitive-closure classes".into())
}

/// Fine sets mapped to the coarse cover, one box per two along every axis.
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

fn monotone_and_refined(s: &Scenario, fine: &Scenario) -> Result<String, String> {
    let eps = s.chain.eps;
    let g1 = graph_of(s, eps)?;
    let g2 = graph_of(s, 2.0 * eps)?;
    let e2: HashSet<_> = g2.edge_list().collect();
    let missing = g1.edge_list().filter(|e| !e2.contains(e)).count();
    ensure(missing == 0, || format!("{}: {missing} edges at eps missing at 2 eps", s.name))?;
    let (sets1, sets2) = (chain_control_sets(&g1), chain_control_sets(&g2));
    ensure(sets1.iter().all(|a| sets2.iter().any(|b| a.is_subset_of(b))), || {
        format!("{}: a set at eps is not inside a set at 2 eps", s.name)
    })?;

    let gf = graph_of(fine, fine.chain.eps)?;
    let coarse_all = ChainSetApprox::new(sets1.iter().flat_map(|c| c.nodes().iter().copied()).collect(), s.cover.box_count());
    let inflated = coarse_all.inflate(&s.grid, &s.cover, 0, 1);
    let fine_sets = chain_control_sets(&gf);
    let outside: usize = fine_sets
        .iter()
        .map(|f| coarsen(f, &fine.cover, &s.cover).iter().filter(|&&n| !inflated.contains(n)).count())
        .sum();
    ensure(outside == 0, || format!("{}: {outside} refined nodes outside the coarse 1-box inflation", s.name))?;
    Ok(format!("{} ({} -> {} edges, {} -> {} fine sets)", s.name, g1.edge_count(), g2.edge_count(), sets1.len(), fine_sets.len()))
}

fn monotonicity_refinement() -> Outcome {
    let a = scenarios::cubic_autonomous();
    let mut af = scenarios::cubic_autonomous();
    af.cover = BoxCover::new(af.system.domain().clone(), vec![512]).unwrap();
    af.chain.eps = af.cover.box_diameter();
    let first = monotone_and_refined(&a, &af)?;
    let second = monotone_and_refined(&scenarios::cubic_hull(), &scenarios::cubic_hull_with(16, 256))?;
    Ok(format!("{first}; {second}"))
}

fn single_fiber() -> Outcome {
    let s = scenarios::cubic_hull();
    let g = graph_of(&s, s.chain.eps)?;
    let direct = chain_control_sets(&g);
    let controls = sample_controls(s.system.control_range(), s.control_levels).unwrap();
    let sf = single_fiber_reconstruct(
        &s.system,
        &s.cover,
        &s.grid,
        &DrivingPoint::origin(2),
        &s.chain,
        &controls,
        &s.integrator,
    )
    .map_err(|e| e.to_string())?;
    ensure(!sf.components.is_empty(), || "no component".into())?;
    let inflated: Vec<_> = direct.iter().map(|e| e.eps_inflate(&s.grid, &s.cover, s.chain.eps)).collect();
    for (i, c) in sf.components.iter().enumerate() {
        ensure(inflated.iter().any(|e| c.set.is_subset_of(e)), || format!("component {i} not inside an inflated set"))?;
        ensure(c.mutually_reachable, || format!("component {i} not mutually reachable"))?;
    }
    let sizes: Vec<usize> = sf.components.iter().map(|c| c.set.len()).collect();
    Ok(format!("components {sizes:?} inside the eps-inflation, mutually reachable"))
}

fn equilibrium() -> Outcome {
    let s = scenarios::cubic_hull();
    let table = pullback_equilibrium(&s.grid, &s.system, &s.integrator, &PullbackConfig::default())
        .map_err(|e| e.to_string())?;
    ensure(table.max_residual() < 1e-4 && table.change < 1e-5, || {
        format!("residual {:.2e}, change {:.2e}", table.max_residual(), table.change)
    })?;
    let rep = check_exact_condition(&table, 0.2, 2.0, &s.system, &s.integrator).map_err(|e| e.to_string())?;
    let passing = rep.eps_passing.filter(|&e| e > 0.0).ok_or("no eps' passes")?;
    Ok(format!(
        "H = {}, residual {:.2e}, change {:.2e}; condition passes at eps' = {passing}",
        table.horizon,
        table.max_residual(),
        table.change
    ))
}

fn lift() -> Outcome {
    let s = scenarios::cubic_autonomous();
    let g = graph_of(&s, s.chain.eps)?;
    let set = chain_control_sets(&g).into_iter().max_by_key(|c| c.len()).ok_or("no chain set")?;
    let samples = lift_samples(&set, &g, &s.system, &s.integrator, 10.0, 50, 8).map_err(|e| e.to_string())?;
    ensure(samples.len() == 50, || format!("only {} certified samples", samples.len()))?;
    let eps = 3.0 * s.cover.box_diameter();
    let basis = MetricBasis::for_period(1, s.chain.t);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for k in 0..20 {
        let (i, j) = (rng.gen_range(0..50), rng.gen_range(0..50));
        let chain = phi_chain_between(&samples[i], &samples[j], eps, s.chain.t, &g, &set, &basis, &s.system, &s.integrator)
            .map_err(|e| format!("pair {k} ({i}, {j}): {e}"))?;
        worst = worst.max(chain.max_distance());
    }
    let proj = project_chain_set(&samples, &set, &s.grid, &s.cover, &s.system, &s.integrator).map_err(|e| e.to_string())?;
    ensure(proj.inside(), || format!("{} projected nodes outside", proj.outside))?;
    Ok(format!("50 samples on W = 10; 20 chains, max link distance {worst:.2e} < {eps}; projection inside"))
}

fn mixing() -> Outcome {
    let s = scenarios::cubic_hull();
    let table = pullback_equilibrium(&s.grid, &s.system, &s.integrator, &PullbackConfig::default())
        .map_err(|e| e.to_string())?;
    let config = MixingConfig::new(2.0, 0.2);
    let (delta, eps0) = (1e-2, 0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut worst, mut longest) = (0.0f64, 0.0f64);
    for k in 0..10 {
        let (w1, w2) = (random_omega(2, &mut rng), random_omega(2, &mut rng));
        let a1 = table.alpha_at(&s.system, &s.integrator, &w1).map_err(|e| e.to_string())?;
        let a2 = table.alpha_at(&s.system, &s.integrator, &w2).map_err(|e| e.to_string())?;
        let y1 = [a1[0] + rng.gen_range(-0.9..0.9) * config.eps];
        let y2 = [a2[0] + rng.gen_range(-0.9..0.9) * eps0];
        let tr = mixing_transfer(&w1, &y1, &w2, &y2, eps0, &table, &s.system, &s.integrator, delta, &config)
            .map_err(|e| format!("pair {k}: {e}"))?;
        worst = worst.max(tr.hit_error);
        longest = longest.max(tr.coast_time);
    }
    ensure(worst < 1e-6, || format!("hit error {worst:.2e}"))?;
    Ok(format!("10 transfers, max hit error {worst:.2e}, longest coast {longest:.1}"))
}

fn metric() -> Outcome {
    let range = ControlRange::new(vec![(-1.0, 1.0)]).unwrap();
    let basis = MetricBasis::dyadic(1, 3.0, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let d = |a: &ControlSignal, b: &ControlSignal| weak_star_distance(a, b, &basis).map_err(|e| e.to_string());
    for k in 0..500 {
        let [u, v, w] = [0, 1, 2].map(|_| random_signal(&range, -4.0, 4.0, 8, &mut rng));
        let (uv, vu, vw, uw) = (d(&u, &v)?, d(&v, &u)?, d(&v, &w)?, d(&u, &w)?);
        ensure(uv >= 0.0 && d(&u, &u)? == 0.0, || format!("triple {k}: positivity"))?;
        ensure((uv - vu).abs() <= 1e-12, || format!("triple {k}: symmetry"))?;
        ensure(uw <= uv + vw + 1e-12, || format!("triple {k}: triangle"))?;
    }
    let single = MetricBasis::new(1, vec![TestFunction::indicator(0.0, 1.0, vec![1.0])]).map_err(|e| e.to_string())?;
    let example = weak_star_distance(&ControlSignal::constant(vec![1.0]), &ControlSignal::zero(1), &single)
        .map_err(|e| e.to_string())?;
    ensure(example == 0.25, || format!("single-basis example gave {example}"))?;
    Ok("axioms hold on 500 triples; single-basis example = 0.25".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("cocycle law", cocycle_law),
        ("integrator order", integrator_order),
        ("autonomous baseline", autonomous_baseline),
        ("scc oracle", scc_oracle),
        ("monotonicity and refinement", monotonicity_refinement),
        ("single fiber", single_fiber),
        ("equilibrium", equilibrium),
        ("lift", lift),
        ("mixing transfer", mixing),
        ("metric", metric),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name} [{secs:.1}s]: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} [{secs:.1}s]: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
