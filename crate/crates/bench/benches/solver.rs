use std::hint::black_box;

use adql_bench::reference_game;
use adql_core::{build_br_graph, delta_bar, perturbation_gap, q_star, soften_policy, DeterministicPolicy};
use criterion::{criterion_group, criterion_main, Criterion};

fn solver(c: &mut Criterion) {
    let game = reference_game();
    let other = soften_policy(&game, &DeterministicPolicy::new(1, vec![0, 1]), 0.05).unwrap();

    c.bench_function("q_star", |b| {
        b.iter(|| q_star(black_box(&game), 0, std::slice::from_ref(&other), 1e-10).unwrap())
    });
    c.bench_function("build_br_graph", |b| b.iter(|| build_br_graph(black_box(&game), 1e-9).unwrap()));
    c.bench_function("delta_bar", |b| b.iter(|| delta_bar(black_box(&game), 1e-9).unwrap()));
    c.bench_function("perturbation_gap", |b| b.iter(|| perturbation_gap(black_box(&game), &[0.05, 0.05]).unwrap()));
}

criterion_group!(benches, solver);
criterion_main!(benches);
