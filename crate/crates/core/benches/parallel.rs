use alpha_rim::data::{generate_synthetic, prepare, PipelineOptions, SplitSpec, SynthSpec};
use alpha_rim::model::{Forecaster, ModelConfig, ModelKind};
use alpha_rim::{Execution, SeededRng};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn setup() -> (Forecaster, alpha_rim::data::PreparedData) {
    let raw = generate_synthetic(&SynthSpec::default()).unwrap();
    let split = SplitSpec::by_fraction(&raw, 0.7, 0.15).unwrap();
    let data = prepare(&raw, &split, &PipelineOptions::new(10, true)).unwrap();
    let model = Forecaster::new(ModelConfig::desk_default(ModelKind::AlphaTRim, 10, 2), 1).unwrap();
    (model, data)
}

fn bench(c: &mut Criterion) {
    let (model, data) = setup();
    let batch = 128.min(data.train.len());
    let mut group = c.benchmark_group("batch_gradients");
    for exec in [Execution::Sequential, Execution::Parallel] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| {
                exec.map_range(batch, |i| {
                    let mut rng = SeededRng::new(7).fork(i as u64);
                    model.sample_grad(&data.train.inputs[i], &data.train.targets[i], &mut rng).unwrap()
                })
            })
        });
    }
    group.finish();

    let mut group = c.benchmark_group("evaluate_train_split");
    for exec in [Execution::Sequential, Execution::Parallel] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| model.predict_all(&data.train.inputs, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bench
}
criterion_main!(benches);
