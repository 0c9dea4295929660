use criterion::{black_box, criterion_group, criterion_main, Criterion};
use rdalloc_bench::fixture;
use rdalloc_core::fit::{fit_surface, window_samples, FitConfig};

fn bench_fit_surface(c: &mut Criterion) {
    let (_, samples) = fixture(2, 1, 100, 5);
    let config = FitConfig::default();
    c.bench_function("fit_surface_2_streams_100_samples", |b| {
        b.iter(|| fit_surface(black_box(&samples), 0, black_box(&config)).unwrap())
    });

    let single_start = FitConfig {
        multistart_count: 1,
        ..FitConfig::default()
    };
    c.bench_function("fit_surface_single_start", |b| {
        b.iter(|| fit_surface(black_box(&samples), 0, black_box(&single_start)).unwrap())
    });
}

fn bench_windowing(c: &mut Criterion) {
    let (_, samples) = fixture(2, 1, 1000, 6);
    c.bench_function("window_samples_1000", |b| {
        b.iter(|| window_samples(black_box(&samples), black_box(100.0)).unwrap())
    });
}

criterion_group!(benches, bench_fit_surface, bench_windowing);
criterion_main!(benches);
