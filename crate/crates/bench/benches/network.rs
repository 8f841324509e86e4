use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;
use svdres_core::nn::{DiffTensor, Graph};
use svdres_core::train::{train, ModelConfig, Toggles, ToyBackbone, TrainConfig, WorkingFlow};

fn passes(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x = DiffTensor::<f32>::randn(&[8, 3, 48, 48], 0.5, &mut rng);
    let mut group = c.benchmark_group("backbone");
    group.sample_size(20);
    for (name, flow) in [
        ("cascaded", WorkingFlow::Cascaded),
        ("parallel", WorkingFlow::Parallel),
        ("cascaded_parallel", WorkingFlow::CascadedParallel),
    ] {
        let cfg = ModelConfig {
            flow,
            ..ModelConfig::default()
        };
        let model = ToyBackbone::<f32>::new(&cfg, Toggles::all(), 0).unwrap();
        group.bench_function(format!("forward/{name}"), |b| {
            b.iter(|| {
                let mut g = Graph::new();
                let vars = model.bind_frozen(&mut g);
                let xi = g.input(black_box(x.clone()));
                model.forward(&mut g, &vars, xi).unwrap()
            })
        });
        group.bench_function(format!("forward_backward/{name}"), |b| {
            b.iter(|| {
                let mut g = Graph::new();
                let vars = model.bind(&mut g);
                let xi = g.input(black_box(x.clone()));
                let y = model.forward(&mut g, &vars, xi).unwrap();
                let l = g.charbonnier(y, xi, 1e-3).unwrap();
                g.backward(l).unwrap();
            })
        });
    }
    group.finish();
}

fn training(c: &mut Criterion) {
    let mut group = c.benchmark_group("train");
    group.sample_size(10);
    for (name, toggles) in [("baseline", Toggles::none()), ("all", Toggles::all())] {
        let cfg = TrainConfig {
            steps: 5,
            eval_every: 0,
            eval_patches: 0,
            pool_size: 4,
            toggles,
            ..TrainConfig::default()
        };
        group.bench_function(format!("5_steps/{name}"), |b| {
            b.iter(|| train(black_box(&cfg)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, passes, training);
criterion_main!(benches);
