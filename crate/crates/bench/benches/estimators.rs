use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use mmdsel_bench::gaussian_pair;
use mmdsel_core::{EstimatorSpec, KernelConfig};

fn estimators(c: &mut Criterion) {
    let kernel = KernelConfig::new(1.0).unwrap();
    let arms = [
        ("incomplete_r0.5", EstimatorSpec::Incomplete { ratio: 0.5 }),
        ("incomplete_r10", EstimatorSpec::Incomplete { ratio: 10.0 }),
        ("block_sqrt", EstimatorSpec::Block { block_size: None }),
        ("linear", EstimatorSpec::Linear),
        ("complete", EstimatorSpec::Complete),
    ];
    let mut group = c.benchmark_group("estimators");
    group.sample_size(10);
    for n in [1000, 4000, 16000] {
        let (x, y) = gaussian_pair(n, 1, 0.5, n as u64);
        group.throughput(Throughput::Elements(n as u64));
        for (name, spec) in arms {
            // The quadratic estimator is only timed on the small sizes.
            if matches!(spec, EstimatorSpec::Complete) && n > 4000 {
                continue;
            }
            group.bench_with_input(BenchmarkId::new(name, n), &n, |b, _| {
                b.iter(|| spec.estimate(&x, &y, &kernel, 7).unwrap().value)
            });
        }
    }
    group.finish();
}

criterion_group!(benches, estimators);
criterion_main!(benches);
