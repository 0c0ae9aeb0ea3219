use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use strokefield_bench::{fields, multi_scene};
use strokefield_core::field::KernelMode;

fn convolution(c: &mut Criterion) {
    let mut group = c.benchmark_group("convolution");
    group.sample_size(10);
    for size in [128, 256] {
        let scene = multi_scene(size);
        group.bench_with_input(BenchmarkId::new("frequency", size), &scene, |b, s| {
            b.iter(|| fields(s, KernelMode::Frequency))
        });
        group.bench_with_input(BenchmarkId::new("spatial", size), &scene, |b, s| {
            b.iter(|| fields(s, KernelMode::Spatial))
        });
    }
    group.finish();
}

fn combine(c: &mut Criterion) {
    let scene = multi_scene(256);
    let f = fields(&scene, KernelMode::Frequency);
    let signs = scene.signs();
    c.bench_function("combine_256", |b| b.iter(|| f.combine(&signs).unwrap()));
}

criterion_group!(benches, convolution, combine);
criterion_main!(benches);
