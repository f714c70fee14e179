use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use glsim_core::dgff::build_sampler;
use glsim_core::gibbs::TorusField;
use glsim_core::rng::stream_rng;
use glsim_core::{BondWeights, FieldState, LatticeDomain, Potential, TorusDomain};

fn langevin_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("em_step");
    for side in [16usize, 32, 64] {
        let d = Arc::new(LatticeDomain::build_rectangle(side, side).unwrap());
        let p = Arc::new(Potential::cosine_perturbed());
        let bd = vec![0.0; d.n_boundary()];
        let mut state = FieldState::zero_start(d.clone(), p.clone(), &bd, p.default_dt()).unwrap();
        let mut rng = stream_rng(1, 0);
        group.bench_with_input(BenchmarkId::from_parameter(side), &side, |b, _| {
            b.iter(|| state.em_step(&mut rng).unwrap())
        });
    }
    group.finish();
}

fn dgff_sample(c: &mut Criterion) {
    let mut group = c.benchmark_group("dgff_sample");
    for side in [16usize, 32, 64] {
        let d = LatticeDomain::build_rectangle(side, side).unwrap();
        let sampler = build_sampler(&d, &BondWeights::uniform(&d, 1.0), &vec![0.0; d.n_boundary()]).unwrap();
        let mut field = sampler.boundary_mean().to_vec();
        let mut rng = stream_rng(2, 0);
        group.bench_with_input(BenchmarkId::from_parameter(side), &side, |b, _| {
            b.iter(|| {
                sampler.sample_into(&mut rng, &mut field);
                black_box(field[0])
            })
        });
    }
    group.finish();
}

fn torus_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("torus_step");
    for side in [16usize, 32] {
        let torus = Arc::new(TorusDomain::new(side).unwrap());
        let p = Arc::new(Potential::cosine_perturbed());
        let mut state = TorusField::new(torus, p.clone(), [0.0, 0.0], p.default_dt()).unwrap();
        let mut rng = stream_rng(3, 0);
        group.bench_with_input(BenchmarkId::from_parameter(side), &side, |b, _| {
            b.iter(|| state.step(&mut rng).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, langevin_step, dgff_sample, torus_step);
criterion_main!(benches);
