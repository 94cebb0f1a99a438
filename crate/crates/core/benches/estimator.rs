use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gssd::sampling::gen_isotropic;
use gssd::{
    estimate_gssd_with, run_sweep, Axis, Bandwidth, DivergenceSpec, Exec, RngStream, Scenario,
    SmoothedSliceConfig, SweepPlan,
};

fn policies() -> [(&'static str, Exec); 2] {
    [
        ("sequential", Exec::Sequential),
        ("parallel", Exec::Parallel),
    ]
}

fn estimator(c: &mut Criterion) {
    let s = RngStream::new(1);
    let a = gen_isotropic(&s.child(0), 2000, 10, 0.0, 1.0, 1).unwrap();
    let b = gen_isotropic(&s.child(1), 2000, 10, 0.5, 2.0, 2).unwrap();
    let mut group = c.benchmark_group("estimate_n2000_d10_L64");
    for spec in [
        DivergenceSpec::wasserstein(2.0),
        DivergenceSpec::mmd(2.0, Bandwidth::MeanPairwise),
    ] {
        let cfg = SmoothedSliceConfig::new(spec, 3.0, 64, 7);
        for (name, exec) in policies() {
            group.bench_with_input(
                BenchmarkId::new(spec.label(), name),
                &exec,
                |bench, &exec| {
                    bench.iter(|| {
                        estimate_gssd_with(black_box(&a), black_box(&b), &cfg, exec).unwrap()
                    })
                },
            );
        }
    }
    group.finish();
}

fn sinkhorn(c: &mut Criterion) {
    let s = RngStream::new(2);
    let a = gen_isotropic(&s.child(0), 300, 10, 0.0, 1.0, 1).unwrap();
    let b = gen_isotropic(&s.child(1), 300, 10, 0.5, 1.0, 2).unwrap();
    let cfg = SmoothedSliceConfig::new(DivergenceSpec::sinkhorn(2.0, 0.1), 1.0, 8, 7);
    let mut group = c.benchmark_group("estimate_sinkhorn_n300_L8");
    group.sample_size(10);
    for (name, exec) in policies() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |bench, &exec| {
            bench.iter(|| estimate_gssd_with(&a, &b, &cfg, exec).unwrap())
        });
    }
    group.finish();
}

fn sweep(c: &mut Criterion) {
    let plan = SweepPlan {
        replicates: 4,
        template: SmoothedSliceConfig::new(DivergenceSpec::default(), 3.0, 16, 3),
        ..SweepPlan::new(
            Axis::SampleSize,
            vec![64.0, 256.0, 1024.0],
            Scenario::StandardNormal,
        )
    };
    let mut group = c.benchmark_group("sample_sweep");
    group.sample_size(10);
    for (name, exec) in policies() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |bench, &exec| {
            bench.iter(|| run_sweep(&plan, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, estimator, sinkhorn, sweep);
criterion_main!(benches);
