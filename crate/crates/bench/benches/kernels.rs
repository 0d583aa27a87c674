use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use mecke_bench::{count_weighted_pair, uniform_jumps, unit_intensity};
use mecke_core::configurations::{mixed_multiple_integral, sample_configuration};
use mecke_core::levy_systems::simulate_path;
use mecke_core::partitions::{enumerate_epsilon_partitions, enumerate_partitions};
use mecke_core::{EpsilonVector, QuadratureSpec, StreamFamily};

fn partition_enumeration(c: &mut Criterion) {
    let mut group = c.benchmark_group("partitions");
    for n in [6usize, 8, 10] {
        group.bench_with_input(BenchmarkId::new("all", n), &n, |b, &n| {
            b.iter(|| enumerate_partitions(black_box(n)).unwrap().len())
        });
        let bits: String = (0..n).map(|i| if i % 3 == 2 { '0' } else { '1' }).collect();
        let eps: EpsilonVector = bits.parse().unwrap();
        group.bench_with_input(BenchmarkId::new("admissible", n), &eps, |b, eps| {
            b.iter(|| enumerate_epsilon_partitions(eps.len(), black_box(eps)).unwrap().len())
        });
    }
    group.finish();
}

fn mixed_integral(c: &mut Criterion) {
    let sigma = unit_intensity(5.0);
    let f = count_weighted_pair();
    let omega = sample_configuration(&sigma, &mut StreamFamily::new(1, "bench").stream(0)).unwrap();
    let quad = QuadratureSpec::tensor(64);
    let mut group = c.benchmark_group("mixed-integral");
    for bits in ["11", "01", "00"] {
        let eps: EpsilonVector = bits.parse().unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(bits), &eps, |b, eps| {
            b.iter(|| mixed_multiple_integral(&f, black_box(&omega), eps, &sigma, &quad).unwrap())
        });
    }
    group.finish();
}

fn path_simulation(c: &mut Criterion) {
    let nu = uniform_jumps();
    let family = StreamFamily::new(2, "bench/paths");
    let mut group = c.benchmark_group("path-simulation");
    for horizon in [1.0, 10.0, 100.0] {
        group.bench_with_input(BenchmarkId::from_parameter(horizon), &horizon, |b, &t| {
            let mut i = 0u64;
            b.iter(|| {
                i += 1;
                simulate_path(&nu, &[0.0], t, &mut family.stream(i)).unwrap().jump_count()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, partition_enumeration, mixed_integral, path_simulation);
criterion_main!(benches);
