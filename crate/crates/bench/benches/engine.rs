use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use fuelgame_core::{
    build_geometry, reflect_step, value_game, BoundarySolution, CostFunction, GameSpec,
    JointState, NoisePath, SchemeParams, ValueQuery,
};

fn bench_boundary_solve(c: &mut Criterion) {
    let cost = CostFunction::quadratic();
    let mut group = c.benchmark_group("boundary_solve");
    group.sample_size(10);
    for (n, alpha) in [(2usize, 1.0f64), (3, 1.0), (5, 0.5)] {
        group.bench_function(format!("n{n}_alpha{alpha}"), |bench| {
            bench.iter(|| BoundarySolution::solve(black_box(&cost), n, alpha, 4.0).unwrap())
        });
    }
    group.finish();
}

fn bench_reflect_step(c: &mut Criterion) {
    let cost = CostFunction::quadratic();
    let spec = GameSpec::pooling(3, 1.0, cost.clone()).unwrap();
    let b = BoundarySolution::solve(&cost, 3, 1.0, 4.0).unwrap();
    let geom = build_geometry(&spec, &b);
    let params = SchemeParams::for_discount(1.0);
    let noise = NoisePath::generate(1, 0, 3, 4096, params.dt);
    let start = JointState::new(vec![0.3, -0.1, -0.2], vec![0.9]);

    c.bench_function("reflect_step_pooling_n3", |bench| {
        bench.iter_batched(
            || (start.clone(), 0usize),
            |(mut state, mut s)| {
                for _ in 0..256 {
                    let (next, _) =
                        reflect_step(&geom, &state, noise.step_slice(s % 4096), &params).unwrap();
                    state = next;
                    s += 1;
                }
                state
            },
            BatchSize::SmallInput,
        )
    });
}

fn bench_value_eval(c: &mut Criterion) {
    let cost = CostFunction::quadratic();
    let spec = GameSpec::dividing(3, 1.0, cost.clone()).unwrap();
    let b = BoundarySolution::solve(&cost, 3, 1.0, 4.0).unwrap();
    let interior = JointState::new(vec![0.2, -0.1, -0.1], vec![0.5, 0.4, 0.6]);
    let exterior = JointState::new(vec![2.4, -1.1, -1.3], vec![0.5, 0.4, 0.6]);

    c.bench_function("value_interior_n3", |bench| {
        bench.iter(|| {
            let q = ValueQuery {
                spec: &spec,
                boundary: &b,
                state: interior.clone(),
                player: 0,
            };
            value_game(black_box(&q)).unwrap()
        })
    });
    c.bench_function("value_with_jump_replay_n3", |bench| {
        bench.iter(|| {
            let q = ValueQuery {
                spec: &spec,
                boundary: &b,
                state: exterior.clone(),
                player: 0,
            };
            value_game(black_box(&q)).unwrap()
        })
    });
}

criterion_group!(benches, bench_boundary_solve, bench_reflect_step, bench_value_eval);
criterion_main!(benches);
