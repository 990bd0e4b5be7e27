//! Compares Monte Carlo trial execution on the rayon path against the
//! sequential fallback (`workers = Some(1)`).

use criterion::{criterion_group, criterion_main, Criterion};
use gsmap_core::estimator::SolverConfig;
use gsmap_core::harness::{
    run_scenario, EstimatorId, ExampleAParams, InitPolicy, PsseParams, Scenario, ScenarioKind,
};
use std::hint::black_box;

fn scenario(workers: Option<usize>) -> Scenario {
    Scenario {
        kind: ScenarioKind::ExampleANmseVsN,
        grid: vec![40.0],
        trials: 64,
        seed: 9,
        estimators: vec![EstimatorId::GspLmmse, EstimatorId::MapFreq, EstimatorId::EgfdMap],
        init: InitPolicy::GspLmmse,
        solver: SolverConfig::default(),
        example_a: ExampleAParams::default(),
        psse: PsseParams::default(),
        training_samples: 100,
        linear_eps_dl: 1e-6,
        workers,
    }
}

fn bench_trials(c: &mut Criterion) {
    let mut group = c.benchmark_group("monte_carlo_trials");
    group.sample_size(10);
    group.bench_function("sequential", |b| {
        let s = scenario(Some(1));
        b.iter(|| black_box(run_scenario(&s).unwrap()))
    });
    group.bench_function("parallel", |b| {
        let s = scenario(None);
        b.iter(|| black_box(run_scenario(&s).unwrap()))
    });
    group.finish();
}

criterion_group!(benches, bench_trials);
criterion_main!(benches);
