use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lindblad_core::generator::GeneratorParams;
use lindblad_core::many_body::{ChainSimulator, SpinChainModel};
use lindblad_core::parallel::{self, Exec};
use lindblad_core::trainer::{Objective, TrainingPair};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn trajectories(c: &mut Criterion) {
    let sim = ChainSimulator::new(&SpinChainModel::model_i(7, 1.0, 1.0, 0.1, 0.0).unwrap()).unwrap();
    let seeds: Vec<u64> = (0..8).collect();
    let mut group = c.benchmark_group("trajectories_n7");
    group.sample_size(10);
    for exec in [Exec::Sequential, Exec::Parallel] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| parallel::map(exec, &seeds, |&s| sim.simulate_seeded(s, 0.01, 200).unwrap()))
        });
    }
    group.finish();
}

fn batch_gradient(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let obj = Objective::new(2, 0.01).unwrap();
    let params = GeneratorParams::random(&mut rng, 15, 0.1);
    let m = obj.propagator(&params).unwrap();
    let batch: Vec<TrainingPair> = (0..256)
        .map(|s| {
            let v = lindblad_core::spin_algebra::rho_to_coherence(&lindblad_core::many_body::seeded_initial_state(s), obj.basis()).unwrap();
            let w = lindblad_core::spin_algebra::CoherenceVector::pinned(&m * v.as_vector(), 4);
            TrainingPair { v_in: v, v_out: w }
        })
        .collect();
    let mut group = c.benchmark_group("batch_gradient_256");
    for exec in [Exec::Sequential, Exec::Parallel] {
        let o = obj.clone().with_exec(exec);
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &o, |b, o| {
            b.iter(|| o.loss_and_gradient(&params, &batch).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, trajectories, batch_gradient);
criterion_main!(benches);
