use criterion::{criterion_group, criterion_main, Criterion};
use hscache::bench::{run_grid_with, ChainProfile, Execution, ExperimentSpec};
use hscache::handshake::{Auth, Mode, Version};

fn spec() -> ExperimentSpec {
    ExperimentSpec {
        versions: vec![Version::V12, Version::V13],
        modes: Mode::ALL.to_vec(),
        mtus: vec![127, 576, 1500],
        chains: vec![ChainProfile::Ecc256x3, ChainProfile::SingleRsa2048],
        repetitions: 2,
        warm: true,
        auth: Auth::Mutual,
        seed: 1,
    }
}

fn grid(c: &mut Criterion) {
    let spec = spec();
    // key generation is memoized; keep it out of the measurement
    run_grid_with(&spec, Execution::Sequential).unwrap();
    let mut g = c.benchmark_group("grid_48_cells");
    g.sample_size(10);
    g.bench_function("sequential", |b| b.iter(|| run_grid_with(&spec, Execution::Sequential).unwrap()));
    g.bench_function("parallel", |b| b.iter(|| run_grid_with(&spec, Execution::Parallel).unwrap()));
    g.finish();
}

criterion_group!(benches, grid);
criterion_main!(benches);
