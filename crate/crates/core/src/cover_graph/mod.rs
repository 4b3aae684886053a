//! Cell × box discretization of `Ω × Q`, the chain transition graph and the
//! sets read off from it.

mod chain_sets;
mod cover;
pub mod export;
mod graph;
mod scc;

use thiserror::Error;

pub use chain_sets::{
    chain_control_sets, chain_reachable, single_fiber_reconstruct, ChainSetApprox, FiberComponent, SingleFiber,
};
pub use cover::{build_cover, BoxCover};
pub use graph::{build_chain_graph, required_eps, ChainGraph, ChainParams, Csr, EdgeLabel};
pub(crate) use graph::{build_graph_with, TargetRule};
pub use scc::{scc, strongly_connected_components};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("invalid subdivision {0:?}: need one positive count per state dimension")]
    BadCover(Vec<usize>),
    #[error("invalid chain parameters: {0}")]
    BadParams(String),
    #[error("eps = {eps} is below the discretization scale {needed}")]
    EpsilonTooSmall { eps: f64, needed: f64 },
    #[error("no controls given")]
    NoControls,
    #[error("empty graph: every trajectory left the domain")]
    EmptyGraph,
    #[error("unknown node {0}")]
    UnknownNode(usize),
    #[error("no chain-controllable fiber set found")]
    NoFiberSet,
}

#[cfg(test)]
mod tests {
    use super::chain_sets::nontrivial_components;
    use super::*;
    use crate::cocycle::{BoxDomain, IntegratorConfig, SystemDef};
    use crate::driving::{DrivingFlowSpec, DrivingGrid, DrivingPoint};
    use crate::signals::{sample_controls, ControlRange, ControlSignal};

    fn cubic(range: (f64, f64)) -> SystemDef {
        SystemDef::parse(
            DrivingFlowSpec::trivial(),
            ControlRange::new(vec![range]).unwrap(),
            BoxDomain::new(vec![-2.0], vec![2.0]).unwrap(),
            &[vec!["-x1^3".into()], vec!["1".into()]],
        )
        .unwrap()
    }

    fn autonomous(boxes: usize, range: (f64, f64)) -> (SystemDef, BoxCover, DrivingGrid, ChainGraph) {
        let sys = cubic(range);
        let cover = BoxCover::new(sys.domain().clone(), vec![boxes]).unwrap();
        let grid = DrivingGrid::single(1);
        let controls = sample_controls(sys.control_range(), 5).unwrap();
        let cfg = IntegratorConfig::for_domain(sys.domain(), 0.01);
        let params = ChainParams::new(1.0, cover.box_diameter());
        let g = build_chain_graph(&sys, &cover, &grid, &params, &controls, &cfg).unwrap();
        (sys, cover, grid, g)
    }

    #[test]
    fn band_boxes_return_to_the_band() {
        let (_, cover, _, g) = autonomous(64, (-0.5, 0.5));
        let r = 0.5f64.cbrt();
        for b in 0..64 {
            let c = cover.center(b)[0];
            if c.abs() < r {
                assert!(
                    g.successors(b).iter().any(|&t| cover.center(t as usize)[0].abs() < r + cover.box_diameter()),
                    "box {b}"
                );
            }
        }
    }

    #[test]
    fn outer_box_moves_inward() {
        let sys = cubic((0.0, 0.0));
        let cover = BoxCover::new(sys.domain().clone(), vec![64]).unwrap();
        let grid = DrivingGrid::single(1);
        let cfg = IntegratorConfig::for_domain(sys.domain(), 0.01);
        let params = ChainParams::new(1.0, cover.box_diameter());
        let g = build_chain_graph(&sys, &cover, &grid, &params, &[ControlSignal::zero(1)], &cfg).unwrap();
        let top = cover.box_of(&[1.9]).unwrap();
        assert!(!g.successors(top).is_empty());
        assert!(g.successors(top).iter().all(|&t| cover.center(t as usize)[0] < 1.9));
    }

    /// Half-width of the zone where `ẋ = -x³` moves less than `eps` in time `t`:
    /// the root of `x - x / sqrt(1 + 2 t x²) = eps`.
    fn slow_zone(eps: f64, t: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, 2.0);
        for _ in 0..100 {
            let mid: f64 = 0.5 * (lo + hi);
            if mid - mid / (1.0 + 2.0 * t * mid * mid).sqrt() < eps {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    #[test]
    fn zero_control_sets_shrink_to_the_equilibrium() {
        let sys = cubic((0.0, 0.0));
        let grid = DrivingGrid::single(1);
        let cfg = IntegratorConfig::for_domain(sys.domain(), 0.01);
        let mut widths = Vec::new();
        for boxes in [64, 256] {
            let cover = BoxCover::new(sys.domain().clone(), vec![boxes]).unwrap();
            let params = ChainParams::new(1.0, cover.box_diameter());
            let g = build_chain_graph(&sys, &cover, &grid, &params, &[ControlSignal::zero(1)], &cfg).unwrap();
            let sets = chain_control_sets(&g);
            let zero_box = cover.box_of(&[0.0]).unwrap();
            assert!(sets.iter().any(|s| s.contains(zero_box)));
            let bound = slow_zone(cover.box_diameter(), 1.0) + cover.box_diameter();
            let hull = sets.iter().filter_map(|s| s.interval(&cover)).fold((0.0f64, 0.0f64), |a, b| (a.0.min(b.0), a.1.max(b.1)));
            assert!(hull.0 >= -bound && hull.1 <= bound, "{hull:?} vs {bound}");
            widths.push(hull.1 - hull.0);
        }
        assert!(widths[1] < widths[0]);
    }

    #[test]
    fn one_band_for_the_autonomous_cubic() {
        let (_, cover, _, g) = autonomous(64, (-0.5, 0.5));
        let sets = chain_control_sets(&g);
        assert_eq!(sets.len(), 1);
        assert!(sets[0].has_internal_edges(&g));
        let (lo, hi) = sets[0].interval(&cover).unwrap();
        let r = 0.5f64.cbrt();
        assert!((lo + r).abs() <= 2.0 * cover.box_diameter(), "{lo}");
        assert!((hi - r).abs() <= 2.0 * cover.box_diameter(), "{hi}");
        let start = cover.box_of(&[1.9]).unwrap();
        let reach = chain_reachable(&g, start).unwrap();
        assert!(sets[0].nodes().iter().all(|n| reach.contains(n)));
        assert!(chain_reachable(&g, 10_000).is_err());
    }

    #[test]
    fn edges_are_sorted_and_labelled() {
        let (_, _, _, g) = autonomous(32, (-0.5, 0.5));
        for v in 0..g.node_count() {
            let e: Vec<_> = g.edges(v).collect();
            assert!(e.windows(2).all(|w| w[0] < w[1]));
            assert!(e.iter().all(|(_, l)| (l.control as usize) < 5 && l.time < 3));
        }
        for &t in g.jump_times() {
            assert!(t >= g.params().t && t <= 2.0 * g.params().t);
        }
    }

    #[test]
    fn rejects_small_eps_and_bad_factors() {
        let sys = cubic((-0.5, 0.5));
        let cover = BoxCover::new(sys.domain().clone(), vec![16]).unwrap();
        let grid = DrivingGrid::single(1);
        let cfg = IntegratorConfig::for_domain(sys.domain(), 0.01);
        let controls = sample_controls(sys.control_range(), 3).unwrap();
        let small = ChainParams::new(1.0, 0.1);
        assert!(matches!(
            build_chain_graph(&sys, &cover, &grid, &small, &controls, &cfg),
            Err(GraphError::EpsilonTooSmall { .. })
        ));
        let bad = ChainParams { jump_factors: vec![0.5], ..ChainParams::new(1.0, 0.25) };
        assert!(build_chain_graph(&sys, &cover, &grid, &bad, &controls, &cfg).is_err());
        assert!(build_chain_graph(&sys, &cover, &grid, &ChainParams::new(1.0, 0.25), &[], &cfg).is_err());
    }

    #[test]
    fn empty_graph_is_reported() {
        // ẋ = 5 pushes everything out of the domain
        let sys = SystemDef::parse(
            DrivingFlowSpec::trivial(),
            ControlRange::new(vec![(0.0, 0.0)]).unwrap(),
            BoxDomain::new(vec![0.0], vec![1.0]).unwrap(),
            &[vec!["5".into()], vec!["1".into()]],
        )
        .unwrap();
        let cover = BoxCover::new(sys.domain().clone(), vec![4]).unwrap();
        let cfg = IntegratorConfig::for_domain(sys.domain(), 0.01);
        let res = build_chain_graph(
            &sys,
            &cover,
            &DrivingGrid::single(1),
            &ChainParams::new(1.0, 0.25),
            &[ControlSignal::zero(1)],
            &cfg,
        );
        assert!(matches!(res, Err(GraphError::EmptyGraph)));
    }

    #[test]
    fn isolated_node_without_loop_is_not_a_set() {
        let csr = Csr::from_adjacency(&[vec![], vec![1], vec![0]]);
        assert_eq!(nontrivial_components(&csr), vec![vec![1]]);
    }

    #[test]
    fn single_fiber_matches_direct_band() {
        let (sys, cover, grid, g) = autonomous(64, (-0.5, 0.5));
        let direct = chain_control_sets(&g);
        let controls = sample_controls(sys.control_range(), 5).unwrap();
        let cfg = IntegratorConfig::for_domain(sys.domain(), 0.01);
        let params = ChainParams::new(1.0, cover.box_diameter());
        let sf = single_fiber_reconstruct(&sys, &cover, &grid, &DrivingPoint::origin(1), &params, &controls, &cfg)
            .unwrap();
        assert_eq!(sf.components.len(), 1);
        let comp = &sf.components[0];
        assert!(comp.mutually_reachable);
        let (lo, hi) = comp.set.interval(&cover).unwrap();
        let (dlo, dhi) = direct[0].interval(&cover).unwrap();
        assert!((lo - dlo).abs() <= 2.0 * cover.box_diameter() && (hi - dhi).abs() <= 2.0 * cover.box_diameter());
    }

    #[test]
    fn single_fiber_collapses_to_equilibrium() {
        let sys = cubic((0.0, 0.0));
        let cover = BoxCover::new(sys.domain().clone(), vec![64]).unwrap();
        let cfg = IntegratorConfig::for_domain(sys.domain(), 0.01);
        let params = ChainParams::new(1.0, cover.box_diameter());
        let sf = single_fiber_reconstruct(
            &sys,
            &cover,
            &DrivingGrid::single(1),
            &DrivingPoint::origin(1),
            &params,
            &[ControlSignal::zero(1)],
            &cfg,
        )
        .unwrap();
        let bound = slow_zone(cover.box_diameter(), 1.0) + cover.box_diameter();
        let zero_box = cover.box_of(&[0.0]).unwrap();
        assert!(sf.components.iter().any(|c| c.set.contains(zero_box)));
        for comp in &sf.components {
            let (lo, hi) = comp.set.interval(&cover).unwrap();
            assert!(lo >= -bound && hi <= bound);
        }
    }

    #[test]
    fn edge_list_round_trip() {
        let (_, _, _, g) = autonomous(16, (-0.5, 0.5));
        let mut buf = Vec::new();
        export::write_edge_list(&g, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"CHGR");
        assert_eq!(buf.len(), 24 + 19 * g.edge_count());
        let (nodes, edges) = export::read_edge_list(&buf[..]).unwrap();
        assert_eq!(nodes as usize, g.node_count());
        let orig: Vec<_> = g.edge_list().map(|(s, t, l)| (s as u64, t as u64, l)).collect();
        assert_eq!(edges, orig);
    }
}
