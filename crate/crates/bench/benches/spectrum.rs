use criterion::{black_box, criterion_group, criterion_main, Criterion};

use glvortex::{bifurcation_points, make_disk, make_sphere};

fn spectrum(c: &mut Criterion) {
    let (sphere, disk) = (make_sphere(), make_disk());
    let mut g = c.benchmark_group("bifurcation_points");
    g.sample_size(20);
    g.bench_function("sphere m=1 six", |b| b.iter(|| bifurcation_points(&sphere, 1, black_box(6)).unwrap()));
    g.bench_function("disk m=1 four", |b| b.iter(|| bifurcation_points(&disk, 1, black_box(4)).unwrap()));
    g.finish();
}

criterion_group!(benches, spectrum);
criterion_main!(benches);
