use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use graphda_core::online::{HyperParams, Learner, LearnerKind, LossKind, Sample};
use graphda_core::{
    build_grid_graph, exact_top_s, solve_pcst, PcstInstance, ProjectionConfig, Projector,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_vector(p: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn pcst(c: &mut Criterion) {
    let mut group = c.benchmark_group("pcst");
    for side in [16, 33, 64] {
        let graph = build_grid_graph(side, side, 1.0);
        let prizes: Vec<f64> = random_vector(graph.node_count(), 1).iter().map(|v| v * v).collect();
        let instance = PcstInstance::new(&graph, &prizes, 1).with_cost_scale(0.05);
        group.bench_with_input(BenchmarkId::from_parameter(side), &instance, |b, inst| {
            b.iter(|| solve_pcst(black_box(inst)).unwrap())
        });
    }
    group.finish();
}

fn projections(c: &mut Criterion) {
    let graph = build_grid_graph(33, 33, 1.0);
    let p = graph.node_count();
    let w = random_vector(p, 2);
    let head = ProjectionConfig::head(p, 26, 1, 0.1, 20, Default::default()).unwrap();
    let tail = ProjectionConfig::tail(p, 26, 1, 0.1, 20).unwrap();
    let mut projector = Projector::new();
    c.bench_function("head 33x33", |b| {
        b.iter(|| projector.model_support(black_box(&w), &graph, &head).unwrap())
    });
    c.bench_function("tail 33x33", |b| {
        b.iter(|| projector.model_support(black_box(&w), &graph, &tail).unwrap())
    });
    c.bench_function("top-s 33x33", |b| b.iter(|| exact_top_s(black_box(&w), 26)));
}

fn graphda_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("graph-da step");
    group.sample_size(20);
    for side in [32, 64] {
        let graph = build_grid_graph(side, side, 1.0);
        let p = graph.node_count();
        let hyper = HyperParams { sparsity: 26, gamma: 10.0, ..HyperParams::default() };
        let sample = Sample::new(random_vector(p, 3), 1.0);
        let mut learner = Learner::new(LearnerKind::GraphDa, hyper, p, Some(&graph)).unwrap();
        // get past the t = 0 shortcut
        let (_, g) = LossKind::Logistic.loss_grad(&learner.state.w, &sample).unwrap();
        learner.step(&g).unwrap();
        group.bench_function(BenchmarkId::from_parameter(side), |b| {
            b.iter(|| {
                let (_, g) = LossKind::Logistic.loss_grad(&learner.state.w, &sample).unwrap();
                learner.step(black_box(&g)).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, pcst, projections, graphda_step);
criterion_main!(benches);
