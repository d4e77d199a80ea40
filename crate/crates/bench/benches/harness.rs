use criterion::{black_box, criterion_group, criterion_main, Criterion};

use vsm13_bench::fixture_population;
use vsm13_core::alignment::{
    alignment_distance, classify, derive_references, DerivationRow, ReferenceSet,
};
use vsm13_core::published::{published_rows, run_golden_checks};
use vsm13_core::scoring::{compute_dimensions, compute_means, DimensionConstants};
use vsm13_core::testkit::noisy_corpus;
use vsm13_core::parser::parse_likert;

fn bench_parser(c: &mut Criterion) {
    let corpus = noisy_corpus(11, 500);
    c.bench_function("parse_500_noisy_responses", |b| {
        b.iter(|| {
            let mut parsed = 0usize;
            for case in &corpus {
                if parse_likert(black_box(&case.text), case.language).is_ok() {
                    parsed += 1;
                }
            }
            parsed
        })
    });
}

fn bench_scoring(c: &mut Criterion) {
    let population = fixture_population();
    let constants = DimensionConstants::default();
    c.bench_function("score_population_of_20", |b| {
        b.iter(|| {
            let means = compute_means(black_box(&population)).expect("complete population");
            compute_dimensions(&means, &constants)
        })
    });
}

fn bench_alignment(c: &mut Criterion) {
    let rows = published_rows();
    let references = ReferenceSet::embedded();
    let us = references.get("US").expect("US reference");
    c.bench_function("distance_and_class_for_36_populations", |b| {
        b.iter(|| {
            rows.iter()
                .map(|row| {
                    let distance =
                        alignment_distance(&row.population, black_box(&row.scores), us);
                    classify(&distance)
                })
                .count()
        })
    });
}

fn bench_golden(c: &mut Criterion) {
    let mut group = c.benchmark_group("verification");
    group.sample_size(10);
    group.bench_function("golden_checks", |b| {
        b.iter(|| {
            let checks = run_golden_checks();
            assert!(checks.iter().all(|check| check.pass));
            checks.len()
        })
    });
    group.finish();
}

fn bench_derivation(c: &mut Criterion) {
    let rows: Vec<DerivationRow> = published_rows()
        .iter()
        .map(|r| DerivationRow {
            label: r.label(),
            scores: r.scores,
            us_total: r.us_distance,
            china_total: r.china_distance,
        })
        .collect();
    let mut group = c.benchmark_group("derivation");
    group.sample_size(10);
    group.bench_function("derive_references_from_36_rows", |b| {
        b.iter(|| derive_references(black_box(&rows)).expect("unique pair"))
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_parser,
    bench_scoring,
    bench_alignment,
    bench_golden,
    bench_derivation
);
criterion_main!(benches);
