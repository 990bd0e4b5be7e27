//! Per-step cost of the four update rules on the cubic model.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gsmap_core::estimator::{
    egfd_step, gsp_map_filters, gsp_update, map_step_freq, sgsp_map_filters,
};
use gsmap_core::graph::watts_strogatz;
use gsmap_core::measurement::{CubicFrequencyModel, MeasurementModel};
use gsmap_core::spectral::SpectralBasis;
use gsmap_core::stats::{sample_covariances, GaussianPrior, NoiseModel};
use nalgebra::DVector;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::hint::black_box;
use std::sync::Arc;

struct Setup {
    model: CubicFrequencyModel,
    prior: GaussianPrior,
    noise: NoiseModel,
    x: DVector<f64>,
    y_freq: DVector<f64>,
}

fn setup(n: usize) -> Setup {
    let graph = watts_strogatz(n, 5, 0.2, 42 + n as u64).unwrap();
    let basis = Arc::new(SpectralBasis::new(&graph.laplacian()).unwrap());
    let prior = GaussianPrior::from_freq_diag(
        DVector::zeros(n),
        DVector::from_element(n, 0.5),
        basis.clone(),
    )
    .unwrap();
    let noise = NoiseModel::isotropic(0.05, basis.clone()).unwrap();
    let model = CubicFrequencyModel::new(basis);
    let mut rng = StdRng::seed_from_u64(n as u64);
    let x = DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
    let y_freq = DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
    Setup { model, prior, noise, x, y_freq }
}

fn bench_steps(c: &mut Criterion) {
    let mut group = c.benchmark_group("update_step");
    for n in [64usize, 128, 256] {
        let s = setup(n);
        group.bench_with_input(BenchmarkId::new("map-freq", n), &s, |b, s| {
            b.iter(|| {
                black_box(
                    map_step_freq(&s.x, &s.prior, &s.noise, &s.model, &s.y_freq, 0.5).unwrap(),
                )
            })
        });
        group.bench_with_input(BenchmarkId::new("egfd-map", n), &s, |b, s| {
            b.iter(|| black_box(egfd_step(&s.x, &s.prior, &s.noise, &s.model, &s.y_freq, 0.5)))
        });
        group.bench_with_input(BenchmarkId::new("sgsp-map", n), &s, |b, s| {
            b.iter(|| {
                let g = s.model.evaluate_freq(&s.x);
                let covs = sample_covariances(&s.x, s.prior.mean_freq(), &s.y_freq, &g);
                let (f1, f2) =
                    sgsp_map_filters(&s.x, &covs, &s.prior, &s.noise, &s.model, 1e-12).unwrap();
                black_box(gsp_update(&s.x, &f1, &f2, 0.5, s.prior.mean_freq(), &(&s.y_freq - &g)))
            })
        });
        group.bench_with_input(BenchmarkId::new("gsp-map", n), &s, |b, s| {
            b.iter(|| {
                let g = s.model.evaluate_freq(&s.x);
                let (f1, f2) = gsp_map_filters(&s.x, &s.prior, &s.noise, &s.model).unwrap();
                black_box(gsp_update(&s.x, &f1, &f2, 0.5, s.prior.mean_freq(), &(&s.y_freq - &g)))
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_steps);
criterion_main!(benches);
