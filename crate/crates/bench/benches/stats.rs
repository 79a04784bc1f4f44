use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use facihub_core::stats::{
    bh_adjust, exact_mann_whitney_p, exact_wilcoxon_p, permutation_sensitivity, PermutationObservation, Tail,
};
use facihub_core::targeting::Condition;

// Deterministic pseudo-data in [0, 1) without pulling an RNG into the bench crate.
fn wobble(i: usize) -> f64 {
    ((i as f64 * 12.9898).sin() * 43_758.545).fract().abs()
}

fn exact_tests(c: &mut Criterion) {
    let mut group = c.benchmark_group("exact");
    for n in [8, 12] {
        let diffs: Vec<f64> = (0..n).map(|i| wobble(i) - 0.3).collect();
        group.bench_with_input(BenchmarkId::new("wilcoxon", n), &diffs, |b, d| {
            b.iter(|| exact_wilcoxon_p(black_box(d), Tail::TwoTailed).unwrap())
        });
        let a: Vec<f64> = (0..n).map(wobble).collect();
        let other: Vec<f64> = (n..2 * n).map(|i| wobble(i) + 0.2).collect();
        group.bench_with_input(BenchmarkId::new("mann_whitney", n), &(a, other), |b, (a, o)| {
            b.iter(|| exact_mann_whitney_p(black_box(a), black_box(o), Tail::TwoTailed).unwrap())
        });
    }
    group.finish();
}

fn permutation(c: &mut Criterion) {
    let mut data = Vec::new();
    for learner in 0..50 {
        for week in 1..=3 {
            for k in 0..4 {
                let i = learner * 100 + week * 10 + k;
                data.push(PermutationObservation {
                    learner_id: format!("u{learner:03}"),
                    iso_week: format!("2025-W{week:02}"),
                    condition: if k % 2 == 0 { Condition::WithPca } else { Condition::WithoutPca },
                    value: wobble(i) * 10.0,
                });
            }
        }
    }
    let mut group = c.benchmark_group("permutation");
    group.sample_size(10);
    for n in [999, 9_999] {
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| permutation_sensitivity("AF", black_box(&data), n, 7).unwrap())
        });
    }
    group.finish();
}

fn bh(c: &mut Criterion) {
    let p: Vec<f64> = (0..1_000).map(wobble).collect();
    c.bench_function("bh_adjust/1000", |b| b.iter(|| bh_adjust(black_box(&p)).unwrap()));
}

criterion_group!(benches, exact_tests, permutation, bh);
criterion_main!(benches);
