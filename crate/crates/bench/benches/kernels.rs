use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use skewchain_bench::{autonomous, controls};
use skewchain_core::cocycle::Solver;
use skewchain_core::cover_graph::{build_chain_graph, chain_control_sets, strongly_connected_components, Csr};
use skewchain_core::scenarios;
use skewchain_core::signals::{random_signal, weak_star_distance, MetricBasis};
use skewchain_core::DrivingPoint;

fn rk4(c: &mut Criterion) {
    let s = scenarios::cubic_hull();
    let solver = Solver::new(&s.system, s.integrator.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let u = random_signal(s.system.control_range(), 0.0, 2.0, 4, &mut rng);
    let omega = DrivingPoint::new(vec![0.3, 0.7]);
    c.bench_function("phi hull T=2", |b| b.iter(|| solver.phi(2.0, omega.coords(), black_box(&[0.4]), &u).unwrap()));
}

fn graph(c: &mut Criterion) {
    let mut group = c.benchmark_group("chain graph");
    group.sample_size(10);
    for boxes in [128, 256, 512] {
        let s = autonomous(boxes);
        let controls = controls(&s);
        group.bench_with_input(BenchmarkId::new("autonomous", boxes), &s, |b, s| {
            b.iter(|| build_chain_graph(&s.system, &s.cover, &s.grid, &s.chain, &controls, &s.integrator).unwrap())
        });
    }
    let s = scenarios::cubic_hull();
    let controls = controls(&s);
    group.bench_function("hull 16x16x128", |b| {
        b.iter(|| build_chain_graph(&s.system, &s.cover, &s.grid, &s.chain, &controls, &s.integrator).unwrap())
    });
    let g = build_chain_graph(&s.system, &s.cover, &s.grid, &s.chain, &controls, &s.integrator).unwrap();
    group.bench_function("hull sets", |b| b.iter(|| chain_control_sets(black_box(&g))));
    group.finish();
}

fn scc(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 100_000;
    let adj: Vec<Vec<usize>> = (0..n).map(|_| (0..3).map(|_| rng.gen_range(0..n)).collect()).collect();
    let csr = Csr::from_adjacency(&adj);
    c.bench_function("scc random 1e5 nodes", |b| b.iter(|| strongly_connected_components(black_box(&csr))));
}

fn metric(c: &mut Criterion) {
    let s = scenarios::cubic_hull();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let basis = MetricBasis::for_period(1, 1.0);
    let (u, v) = (
        random_signal(s.system.control_range(), -4.0, 4.0, 32, &mut rng),
        random_signal(s.system.control_range(), -4.0, 4.0, 32, &mut rng),
    );
    c.bench_function("weak-star distance", |b| b.iter(|| weak_star_distance(black_box(&u), &v, &basis).unwrap()));
}

criterion_group!(benches, rk4, graph, scc, metric);
criterion_main!(benches);
