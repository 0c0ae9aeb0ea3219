use criterion::{criterion_group, criterion_main, Criterion};
use strokefield_bench::{fields, multi_scene};
use strokefield_core::field::KernelMode;
use strokefield_core::repulsion::{DEFAULT_RESTARTS, DEFAULT_VTH1, DEFAULT_VTH2};
use strokefield_core::{brute_force_flips, build_groups, optimize_flips, FlipEvaluator};

fn optimizer(c: &mut Criterion) {
    let scene = multi_scene(128);
    let f = fields(&scene, KernelMode::Frequency);
    let eval = FlipEvaluator::new(&f, None).unwrap();
    let groups = build_groups(&scene, &f, DEFAULT_VTH1, DEFAULT_VTH2).unwrap();
    let signs = scene.signs();

    let mut group = c.benchmark_group("optimizer");
    group.sample_size(10);
    group.bench_function("objective", |b| b.iter(|| eval.objective(&signs).unwrap()));
    group.bench_function("greedy", |b| {
        b.iter(|| optimize_flips(&eval, &groups, &signs, DEFAULT_RESTARTS, 0).unwrap())
    });
    if scene.len() <= 14 {
        group.bench_function("brute_force", |b| b.iter(|| brute_force_flips(&eval).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, optimizer);
criterion_main!(benches);
