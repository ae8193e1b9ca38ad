use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ndarray::Array2;
use poolbench_core::classical::{fit_tree, Targets, TreeParams};
use poolbench_core::deep::{Lstm, LstmConfig, Network, Transformer, TransformerConfig};
use poolbench_core::features::{assemble_matrix, FeatureConfig};
use poolbench_core::quantum::{circuit_expectation, gram_matrix, parameter_shift_grad};
use poolbench_core::runner::synth;
use poolbench_core::seed;
use rand::Rng;

fn random_matrix(rows: usize, cols: usize, s: u64) -> Array2<f64> {
    let mut rng = seed::rng(s);
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

fn trees(c: &mut Criterion) {
    let x = random_matrix(1000, 73, 1);
    let y: Vec<f64> = x.rows().into_iter().map(|r| r[0] + 0.5 * r[1] * r[2]).collect();
    c.bench_function("tree_fit_1000x73_depth8", |b| {
        b.iter(|| fit_tree(x.view(), Targets::Raw(&y), &TreeParams::variance(8, 1), &mut seed::rng(0)).unwrap())
    });
}

fn deep_steps(c: &mut Criterion) {
    let (batch, window, d) = (32, 28, 73);
    let x = random_matrix(batch * window, d, 2);
    let y: Vec<f64> = (0..batch).map(|i| i as f64 / batch as f64).collect();

    let lstm = Lstm::new(d, LstmConfig::default(), &mut seed::rng(3)).unwrap();
    c.bench_function("lstm_forward_backward_b32_l28", |b| {
        b.iter(|| lstm.mse_grad(black_box(x.view()), batch, &y).unwrap())
    });

    let cfg = TransformerConfig {
        d_ff: 128,
        ..TransformerConfig::default()
    };
    let tf = Transformer::new(d, cfg, &mut seed::rng(4)).unwrap();
    c.bench_function("transformer_forward_backward_b32_l28", |b| {
        b.iter(|| tf.mse_grad(black_box(x.view()), batch, &y).unwrap())
    });
}

fn circuits(c: &mut Criterion) {
    let mut rng = seed::rng(5);
    let angles: [f64; 4] = std::array::from_fn(|_| rng.random_range(-3.0..3.0));
    let theta: Vec<f64> = (0..32).map(|_| rng.random_range(-3.0..3.0)).collect();
    c.bench_function("circuit_expectation_4q_4layers", |b| {
        b.iter(|| circuit_expectation(black_box(&angles), &theta))
    });
    c.bench_function("parameter_shift_grad_32", |b| {
        b.iter(|| parameter_shift_grad(black_box(&angles), &theta))
    });

    let xs: Vec<[f64; 4]> = (0..256)
        .map(|_| std::array::from_fn(|_| rng.random_range(-3.0..3.0)))
        .collect();
    c.bench_function("kernel_gram_256", |b| b.iter(|| gram_matrix(black_box(&xs))));
}

fn features(c: &mut Criterion) {
    let series = synth::generate_pool(6, 0, 1460).unwrap();
    let config = FeatureConfig::default();
    c.bench_function("feature_assembly_1460_rows", |b| {
        b.iter(|| assemble_matrix(black_box(&series), &config).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = trees, deep_steps, circuits, features
}
criterion_main!(benches);
