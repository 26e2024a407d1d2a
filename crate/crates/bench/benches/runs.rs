use criterion::{criterion_group, criterion_main, Criterion};
use vqoco::harness::Algorithm;
use vqoco::tuner::{battery, tune};
use vqoco_bench::experiment;

fn runs(c: &mut Criterion) {
    let mut g = c.benchmark_group("run-T1000");
    g.sample_size(20);
    let e = experiment(1, 1000);
    let (x, _) = e.hindsight().unwrap();
    for alg in [
        Algorithm::vq(),
        Algorithm::Doubling,
        Algorithm::primal_dual(0.5),
        Algorithm::OgdProj(Default::default()),
    ] {
        g.bench_function(alg.label(), |b| b.iter(|| e.evaluate_against(&alg, &x).unwrap()));
    }
    g.finish();
}

fn hindsight(c: &mut Criterion) {
    let e = experiment(1, 1000);
    c.bench_function("hindsight-T1000", |b| b.iter(|| e.hindsight().unwrap()));
}

fn tuner(c: &mut Criterion) {
    let problems = battery();
    c.bench_function("tune-battery", |b| b.iter(|| problems.iter().map(|p| tune(p).unwrap().objective).sum::<f64>()));
}

criterion_group!(benches, runs, hindsight, tuner);
criterion_main!(benches);
