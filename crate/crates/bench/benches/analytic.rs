use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use txshare_core::analytic::{
    grid, series_oracle, sweep_distance, AnalyticParams, Evaluation, Model, ModelConfig,
};
use txshare_core::ProtocolKind;

fn success(c: &mut Criterion) {
    let params = AnalyticParams::default().with_distance(10.0);
    for (name, evaluation) in [("closed_form", Evaluation::ClosedForm), ("series", Evaluation::Series)] {
        let model = Model::new(ModelConfig { evaluation, ..ModelConfig::default() });
        c.bench_function(&format!("success_probability/{name}"), |b| {
            b.iter(|| model.success_probability(ProtocolKind::SharingBased, black_box(&params)).unwrap())
        });
    }
    let config = ModelConfig::default();
    c.bench_function("series_oracle/60x60", |b| {
        b.iter(|| series_oracle(ProtocolKind::SharingBased, black_box(&params), &config, 60, 60))
    });
}

fn sweep(c: &mut Criterion) {
    let params = AnalyticParams::default();
    let model = Model::default();
    let d = grid(params.r * 2.0, 0.5);
    c.bench_function("sweep_distance/all_protocols", |b| {
        b.iter(|| sweep_distance(&model, &ProtocolKind::ALL, &params, black_box(&d)).unwrap())
    });
}

criterion_group!(benches, success, sweep);
criterion_main!(benches);
