use gtgan_core::layers::Activation;
use gtgan_core::model::ArchSpec;
use gtgan_core::synth::{make_dataset, DatasetKind};
use gtgan_core::train::{train, TrainConfig};
use std::time::Instant;

fn main() {
    let n = 30;
    let ds = make_dataset(DatasetKind::Poisson, n, 40, 0.5, 7).unwrap();
    let arch = ArchSpec::new(n).with_output_activation(Activation::Sigmoid);
    let cfg = TrainConfig {
        epochs: 0,
        max_steps: Some(100),
        batch_size: 8,
        noise_dim: 2,
        seed: 3,
        ..TrainConfig::default()
    };
    let start = Instant::now();
    train(&ds, &arch, &cfg).unwrap();
    println!("100 steps n=30 batch=8: {:.1}s", start.elapsed().as_secs_f64());
}
