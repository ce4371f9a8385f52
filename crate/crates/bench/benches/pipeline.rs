use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use secmimo_bench::reference;
use secmimo_core::bounds;
use secmimo_core::montecarlo::{realize_trial, run_trial, trial_stats};
use secmimo_core::precoding;
use secmimo_core::training::{lmmse_estimate, make_pilots, Estimator};

fn bench_trial(c: &mut Criterion) {
    let mut group = c.benchmark_group("trial");
    for (label, n_o, slots) in [
        ("common_lo_10_slots", 1usize, 10usize),
        ("distributed_lo_10_slots", 128, 10),
    ] {
        let grid: Vec<usize> = (0..slots).map(|i| 5 + i * 55).collect();
        let cfg = reference(n_o, grid);
        let pilots = make_pilots(&cfg).unwrap();
        let est = Estimator::new(&cfg, &pilots);
        let mut trial = 0u64;
        group.bench_function(label, |b| {
            b.iter(|| {
                trial += 1;
                black_box(run_trial(&cfg, &pilots, &est, trial).unwrap())
            })
        });
    }
    group.finish();
}

fn bench_components(c: &mut Criterion) {
    let cfg = reference(1, vec![5, 60, 115, 170, 225]);
    let pilots = make_pilots(&cfg).unwrap();
    let est = Estimator::new(&cfg, &pilots);
    let real = realize_trial(&cfg, &pilots, &est, 3).unwrap();

    c.bench_function("lmmse_estimate", |b| {
        b.iter(|| black_box(lmmse_estimate(&est, &real.y_train)))
    });
    c.bench_function("span_basis", |b| {
        b.iter(|| black_box(precoding::span_basis(&real.g_hat).unwrap()))
    });
    c.bench_function("slot_statistics", |b| {
        b.iter_batched(
            || real.clone(),
            |r| black_box(trial_stats(&cfg, &r).unwrap()),
            BatchSize::SmallInput,
        )
    });
}

fn bench_bounds(c: &mut Criterion) {
    let cfg = reference(128, (5..=500).collect());
    let pilots = make_pilots(&cfg).unwrap();
    c.bench_function("secrecy_bound_full_grid", |b| {
        b.iter(|| black_box(bounds::secrecy_rate_bound(&cfg, &pilots, 0).unwrap()))
    });
    let grid = bounds::default_phi_grid();
    c.bench_function("optimize_phi_99_points", |b| {
        b.iter(|| black_box(bounds::optimize_phi(&cfg, &pilots, 0, &grid).unwrap()))
    });
}

criterion_group!(benches, bench_trial, bench_components, bench_bounds);
criterion_main!(benches);
