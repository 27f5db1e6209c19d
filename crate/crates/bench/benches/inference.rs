use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mmdsel_bench::screened_state;
use mmdsel_core::{psi_pvalue, test_selected_features, truncnorm_cdf, Alternative, Eta, InferenceMode};

fn inference(c: &mut Criterion) {
    let mut group = c.benchmark_group("inference");
    for (d, k) in [(50, 30), (200, 30)] {
        let state = screened_state(300, d, k, 11);
        let constraints = state.constraints();
        let s = state.selected()[0];
        group.bench_with_input(BenchmarkId::new("psi_pvalue", d), &d, |b, _| {
            b.iter(|| {
                psi_pvalue(state.z(), state.sigma(), &constraints, Eta::Index(s), Alternative::TwoSided, InferenceMode::Selective)
                    .unwrap()
                    .p_value
            })
        });
        group.bench_with_input(BenchmarkId::new("all_selected", d), &d, |b, _| {
            b.iter(|| test_selected_features(&state, 0.05, Alternative::TwoSided, InferenceMode::Selective).unwrap().len())
        });
    }
    group.bench_function("truncnorm_cdf_tail", |b| b.iter(|| truncnorm_cdf(7.5, 0.0, 1.0, 7.0, 9.0).unwrap()));
    group.finish();
}

criterion_group!(benches, inference);
criterion_main!(benches);
