use criterion::{black_box, criterion_group, criterion_main, Criterion};

use glvortex::{make_disk, make_sphere, Shooter};

fn shooting(c: &mut Criterion) {
    let sphere = Shooter::new(&make_sphere(), 1, 8.0).unwrap();
    let disk = Shooter::new(&make_disk(), 1, 30.0).unwrap();
    c.bench_function("launch sphere lambda 8", |b| b.iter(|| sphere.state_at(black_box(1.2), sphere.section(), 1e-10).unwrap()));
    let mut g = c.benchmark_group("find_roots");
    g.sample_size(10);
    g.bench_function("sphere lambda 8", |b| b.iter(|| sphere.find_roots().unwrap()));
    g.bench_function("disk lambda 30", |b| b.iter(|| disk.find_roots().unwrap()));
    g.finish();
}

criterion_group!(benches, shooting);
criterion_main!(benches);
