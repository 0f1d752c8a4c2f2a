use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gtgan_bench::{discriminator, noise_for, random_graph, translator};
use gtgan_core::layers::{
    e2e_conv_forward, e2e_conv_forward_cached, e2e_conv_backward, Activation, FeatureTensor,
    LayerKernels,
};
use gtgan_core::model::{discriminator_forward, translator_backward, translator_forward};
use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn bench_e2e_conv(c: &mut Criterion) {
    let mut group = c.benchmark_group("e2e_conv_forward");
    for &n in &[32usize, 64, 128] {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let kernels = LayerKernels::random(5, 10, n, 0.1, Activation::Relu, &mut rng);
        let x = FeatureTensor {
            n,
            maps: (0..5)
                .map(|_| Array2::from_shape_simple_fn((n, n), || rng.random::<f64>()))
                .collect(),
        };
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| e2e_conv_forward(&x, &kernels).unwrap())
        });
    }
    group.finish();
}

fn bench_e2e_conv_backward(c: &mut Criterion) {
    let mut group = c.benchmark_group("e2e_conv_backward");
    for &n in &[32usize, 64, 128] {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let kernels = LayerKernels::random(5, 10, n, 0.1, Activation::Relu, &mut rng);
        let x = FeatureTensor {
            n,
            maps: (0..5)
                .map(|_| Array2::from_shape_simple_fn((n, n), || rng.random::<f64>()))
                .collect(),
        };
        let (_, cache) = e2e_conv_forward_cached(&x, &kernels).unwrap();
        let grad = FeatureTensor {
            n,
            maps: (0..10)
                .map(|_| Array2::from_shape_simple_fn((n, n), || rng.random::<f64>()))
                .collect(),
        };
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| e2e_conv_backward(&kernels, &cache, &grad).unwrap())
        });
    }
    group.finish();
}

fn bench_translator(c: &mut Criterion) {
    let mut group = c.benchmark_group("translator_forward_backward");
    for &n in &[16usize, 32, 64, 128] {
        let model = translator(n, 7);
        let g = random_graph(n, 0.1, 11);
        let noise = noise_for(&model, 13);
        let grad = Array2::from_elem((n, n), 1.0);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| {
                let (_, cache) = translator_forward(&model, &g, &noise, true).unwrap();
                translator_backward(&model, &cache.unwrap(), &grad).unwrap()
            })
        });
    }
    group.finish();
}

fn bench_discriminator(c: &mut Criterion) {
    let mut group = c.benchmark_group("discriminator_forward");
    for &n in &[32usize, 64, 128] {
        let model = discriminator(n, 3);
        let y = random_graph(n, 0.2, 17);
        let x = random_graph(n, 0.1, 19);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| discriminator_forward(&model, &y, &x, false).unwrap())
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_e2e_conv,
    bench_e2e_conv_backward,
    bench_translator,
    bench_discriminator
);
criterion_main!(benches);
