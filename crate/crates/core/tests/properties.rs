use proptest::prelude::*;

use skewchain_core::cocycle::{BoxDomain, IntegratorConfig, Solver, SystemDef};
use skewchain_core::control_sets::{reach_set, ReachMode};
use skewchain_core::cover_graph::{build_chain_graph, chain_control_sets, BoxCover, ChainGraph, ChainParams};
use skewchain_core::driving::{DrivingFlowSpec, DrivingGrid, DrivingPoint};
use skewchain_core::lift::{lift_samples, project_chain_set};
use skewchain_core::scenarios;
use skewchain_core::signals::{sample_controls, weak_star_distance, ControlRange, ControlSignal, MetricBasis};

fn signal() -> impl Strategy<Value = ControlSignal> {
    (prop::collection::vec(-4.0f64..4.0, 0..6), prop::collection::vec(-1.0f64..1.0, 7)).prop_map(|(mut sw, vals)| {
        sw.sort_by(f64::total_cmp);
        sw.dedup();
        let values = vals[..=sw.len()].iter().map(|&v| vec![v]).collect();
        ControlSignal::from_pieces(sw, values).unwrap()
    })
}

fn cubic(lo: f64, hi: f64) -> SystemDef {
    SystemDef::parse(
        DrivingFlowSpec::trivial(),
        ControlRange::new(vec![(lo, hi)]).unwrap(),
        BoxDomain::new(vec![-2.0], vec![2.0]).unwrap(),
        &[vec!["-x1^3".into()], vec!["1".into()]],
    )
    .unwrap()
}

fn graph(sys: &SystemDef, boxes: usize, eps_factor: f64) -> (BoxCover, ChainGraph) {
    let cover = BoxCover::new(sys.domain().clone(), vec![boxes]).unwrap();
    let controls = sample_controls(sys.control_range(), 3).unwrap();
    let cfg = IntegratorConfig::for_domain(sys.domain(), 0.02);
    let params = ChainParams::new(1.0, eps_factor * cover.box_diameter());
    let g = build_chain_graph(sys, &cover, &DrivingGrid::single(1), &params, &controls, &cfg).unwrap();
    (cover, g)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shift_is_a_group_action(u in signal(), s in -3.0f64..3.0, t in -3.0f64..3.0, probe in -6.0f64..6.0) {
        let a = u.shift(s + t);
        let b = u.shift(s).shift(t);
        prop_assert_eq!(a.value_at(probe), b.value_at(probe));
        prop_assert_eq!(u.shift(0.0), u);
    }

    #[test]
    fn concatenation_agrees_with_both_parts(u in signal(), v in signal(), s in -3.0f64..3.0, probe in -6.0f64..6.0) {
        let w = u.concatenate(&v, s);
        if probe < s {
            prop_assert_eq!(w.value_at(probe), u.value_at(probe));
        } else {
            prop_assert_eq!(w.value_at(probe), v.value_at(probe - s));
        }
    }

    #[test]
    fn weak_star_metric_axioms(u in signal(), v in signal(), w in signal()) {
        let basis = MetricBasis::dyadic(1, 3.0, 4);
        let d = |a: &ControlSignal, b: &ControlSignal| weak_star_distance(a, b, &basis).unwrap();
        prop_assert!(d(&u, &v) >= 0.0);
        prop_assert_eq!(d(&u, &u), 0.0);
        prop_assert!((d(&u, &v) - d(&v, &u)).abs() <= 1e-12);
        prop_assert!(d(&u, &w) <= d(&u, &v) + d(&v, &w) + 1e-12);
    }

    #[test]
    fn driving_part_is_exact(w1 in 0.0f64..1.0, w2 in 0.0f64..1.0, x in -1.0f64..1.0, t in -1.0f64..1.0, u in signal()) {
        let s = scenarios::cubic_hull();
        let solver = Solver::new(&s.system, IntegratorConfig::for_domain(s.system.domain(), 0.01));
        let omega = DrivingPoint::new(vec![w1, w2]);
        let u = ControlSignal::from_pieces(u.switches().to_vec(), u.values().iter().map(|v| vec![0.5 * v[0]]).collect()).unwrap();
        if let Ok(state) = solver.psi(t, &omega, &[x], &u) {
            prop_assert_eq!(state.omega, s.system.driving().advance(&omega, t));
        }
    }

    #[test]
    fn forward_then_backward_returns(w1 in 0.0f64..1.0, w2 in 0.0f64..1.0, x in -2.0f64..2.0, t in 0.0f64..1.0) {
        let s = scenarios::cubic_hull();
        let solver = Solver::new(&s.system, IntegratorConfig::for_domain(s.system.domain(), 1e-3));
        let omega = DrivingPoint::new(vec![w1, w2]);
        let u = ControlSignal::constant(vec![0.25]);
        let there = solver.psi(t, &omega, &[x], &u).unwrap();
        let back = solver.phi(-t, there.omega.coords(), &there.x, &u.shift(t)).unwrap();
        prop_assert!((back[0] - x).abs() < 1e-6);
    }

    #[test]
    fn scalar_reach_bounds_sampled_controls(w1 in 0.0f64..1.0, w2 in 0.0f64..1.0, x in -1.0f64..1.0, u in signal()) {
        let s = scenarios::cubic_hull();
        let omega = DrivingPoint::new(vec![w1, w2]);
        let reach = reach_set(&omega, &[x], 1.0, &s.system, &s.integrator, &ReachMode::ExactScalar).unwrap();
        let (lo, hi) = reach.interval().unwrap();
        let u = ControlSignal::from_pieces(u.switches().iter().map(|t| (t + 4.0) / 8.0).collect(), u.values().iter().map(|v| vec![0.5 * v[0]]).collect()).unwrap();
        let end = Solver::new(&s.system, s.integrator.clone()).phi(1.0, omega.coords(), &[x], &u).unwrap();
        prop_assert!(end[0] >= lo - 1e-8 && end[0] <= hi + 1e-8, "{} outside [{}, {}]", end[0], lo, hi);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn chain_sets_are_mutually_reachable(lo in -0.6f64..0.0, hi in 0.0f64..0.6, boxes in 16usize..64) {
        let (_, g) = graph(&cubic(lo, hi), boxes, 1.0);
        for set in chain_control_sets(&g) {
            for &a in set.nodes() {
                let seen = g.csr().reachable_from([a]);
                prop_assert!(set.nodes().iter().all(|&b| seen[b]));
            }
        }
    }

    #[test]
    fn reachability_is_transitive(lo in -0.6f64..0.0, hi in 0.0f64..0.6, boxes in 16usize..48, start in 0usize..16) {
        let (_, g) = graph(&cubic(lo, hi), boxes, 1.0);
        let csr = g.csr();
        let first = csr.reachable_from([start]);
        for mid in (0..g.node_count()).filter(|&v| first[v]) {
            let second = csr.reachable_from([mid]);
            prop_assert!((0..g.node_count()).all(|w| !second[w] || first[w]));
        }
    }

    #[test]
    fn edges_grow_with_eps(lo in -0.6f64..0.0, hi in 0.0f64..0.6, boxes in 16usize..64, factor in 1.0f64..3.0) {
        let sys = cubic(lo, hi);
        let (_, small) = graph(&sys, boxes, 1.0);
        let (_, large) = graph(&sys, boxes, factor);
        prop_assert!(small.edge_list().all(|(v, w, _)| large.has_edge(v, w)));
        let big_sets = chain_control_sets(&large);
        for set in chain_control_sets(&small) {
            prop_assert!(big_sets.iter().any(|b| set.is_subset_of(b)));
        }
    }

    #[test]
    fn lifted_samples_project_into_their_set(lo in -0.6f64..-0.2, hi in 0.2f64..0.6, boxes in 32usize..96, seed in 0u64..1000) {
        let sys = cubic(lo, hi);
        let (cover, g) = graph(&sys, boxes, 1.0);
        let cfg = IntegratorConfig::for_domain(sys.domain(), 0.02);
        for set in chain_control_sets(&g).iter().filter(|s| s.len() > 1) {
            let samples = lift_samples(set, &g, &sys, &cfg, 5.0, 5, seed).unwrap();
            prop_assume!(!samples.is_empty());
            let proj = project_chain_set(&samples, set, &DrivingGrid::single(1), &cover, &sys, &cfg).unwrap();
            prop_assert!(proj.inside());
        }
    }
}
