use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};
use dpscale::cachesim::{CacheConfig, CacheHierarchy};
use dpscale::fpbits::{truncate_mantissa, PrecisionFormat};
use dpscale::kernels::{self, Workload, WorkloadInput};
use dpscale::policy::{plan_dps, plan_dps_plus};
use dpscale::profiler::{profile, AccLossMatrices, ProfileOptions};
use dpscale::Transformer;

fn bits(c: &mut Criterion) {
    let xs: Vec<f32> = (0..4096).map(|i| 1.0 + i as f32 * 0.001_7).collect();
    let mut g = c.benchmark_group("fpbits");
    g.throughput(Throughput::Elements(xs.len() as u64));
    g.bench_function("truncate_f32_k12", |b| {
        b.iter(|| xs.iter().map(|&x| truncate_mantissa(black_box(x), 12).unwrap()).sum::<f32>())
    });
    g.finish();
}

fn cache(c: &mut Criterion) {
    let addrs: Vec<u64> = (0..65_536u64).map(|i| (i * 4160) % (1 << 22)).collect();
    let mut g = c.benchmark_group("cachesim");
    g.throughput(Throughput::Elements(addrs.len() as u64));
    g.bench_function("strided_reads", |b| {
        b.iter_batched(
            || CacheHierarchy::new(CacheConfig::default()).unwrap(),
            |mut h| {
                for &a in &addrs {
                    black_box(h.access(a, false));
                }
                h
            },
            BatchSize::LargeInput,
        )
    });
    g.finish();
}

fn planners(c: &mut Criterion) {
    let rows = |scale: f64| -> Vec<Vec<Option<f64>>> {
        (0..64)
            .map(|i| (0..23).map(|b| Some(scale * 2f64.powi(b - 23) * (1 + i % 5) as f64)).collect())
            .collect()
    };
    let m = AccLossMatrices::from_losses(vec!["f".into(); 64], &rows(1.0), &rows(1.5)).unwrap();
    c.bench_function("plan_dps_64x23", |b| b.iter(|| plan_dps(black_box(&m), 0.1).unwrap()));
    c.bench_function("plan_dps_plus_64x23", |b| b.iter(|| plan_dps_plus(black_box(&m), 0.1).unwrap()));
}

fn workloads(c: &mut Criterion) {
    let mut g = c.benchmark_group("workloads");
    for name in ["blackscholes", "hotspot", "pagerank", "particlefilter_lite"] {
        let w = Workload::build(name, &WorkloadInput::Generated, 42).unwrap();
        g.bench_function(format!("{name}_golden"), |b| {
            b.iter(|| {
                kernels::execute(&w, PrecisionFormat::Single, Transformer::Identity, CacheConfig::default()).unwrap()
            })
        });
    }
    let w = Workload::build("synthetic_additive", &WorkloadInput::Generated, 42).unwrap();
    g.sample_size(10);
    g.bench_function("synthetic_profile_8bits", |b| {
        b.iter(|| {
            profile(&w, PrecisionFormat::Single, ProfileOptions { num_bits: Some(8), parallel: true }).unwrap()
        })
    });
    g.finish();
}

criterion_group!(benches, bits, cache, planners, workloads);
criterion_main!(benches);
