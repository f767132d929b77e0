//! Sequential against data-parallel execution for the two parallel paths:
//! edge scoring and experiment instances.

use std::path::Path;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use edgedel::divergence::score_edges;
use edgedel::harness::{run_experiment_with, ExperimentSpec};
use edgedel::par::Exec;
use edgedel::{synth, Evidence};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn scoring(c: &mut Criterion) {
    let mut group = c.benchmark_group("score_edges");
    for (rows, cols) in [(4, 4), (5, 5)] {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = synth::grid(&mut rng, rows, cols, 2, synth::SyntheticCptLaw::UniformSimplex);
        let mut ev = Evidence::new();
        for v in synth::grid_frontier(rows, cols) {
            ev.set(v, 0);
        }
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, format!("grid{rows}x{cols}")), &exec, |b, &exec| {
                b.iter(|| score_edges(&net, &ev, exec).unwrap())
            });
        }
    }
    group.finish();
}

fn experiments(c: &mut Criterion) {
    let spec = ExperimentSpec::from_toml(
        r#"
name = "bench"
network = { kind = "grid", rows = 3, cols = 3 }
instances = 8
k = [2, 6]
methods = ["ed-kl", "ed-bp"]
selections = ["rand", "guided"]
seed = 3
"#,
    )
    .unwrap();
    let mut group = c.benchmark_group("experiment");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new(name, "grid3x3x8"), &exec, |b, &exec| {
            b.iter(|| run_experiment_with(&spec, Path::new("."), exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, scoring, experiments);
criterion_main!(benches);
