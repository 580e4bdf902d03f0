use criterion::{criterion_group, criterion_main, Criterion};

use glvortex::spiral::{NewtonOptions, SpiralProblem};
use glvortex_bench::sphere_set;

fn spiral(c: &mut Criterion) {
    let mut g = c.benchmark_group("spiral newton");
    g.sample_size(10);
    for nodes in [512, 2048] {
        let (s, set) = sphere_set(8.0, nodes);
        let p = SpiralProblem::new(&s, &set.nontrivial[0]).unwrap();
        let zeros = vec![0.0; p.template.len()];
        g.bench_function(format!("{nodes} nodes"), |b| {
            b.iter(|| p.newton((&p.template, &zeros, 0.0), 0.05, 0.02, &NewtonOptions::default()).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, spiral);
criterion_main!(benches);
