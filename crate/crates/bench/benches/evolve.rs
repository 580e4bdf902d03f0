use criterion::{criterion_group, criterion_main, Criterion};

use glvortex::evolve::{bump, Controls, Evolver};
use glvortex_bench::sphere_set;

fn evolve(c: &mut Criterion) {
    let (s, set) = sphere_set(4.0, 512);
    let ev = Evolver::for_set(&s, &set).unwrap();
    let init = bump(&s, 1, &set.trivial.mesh).unwrap();
    let controls = Controls::default();
    let mut g = c.benchmark_group("evolve");
    g.sample_size(10);
    g.bench_function("bump to rest, 512 nodes", |b| b.iter(|| ev.integrate(&init, controls.t_max, &controls).unwrap()));
    g.finish();
}

criterion_group!(benches, evolve);
criterion_main!(benches);
