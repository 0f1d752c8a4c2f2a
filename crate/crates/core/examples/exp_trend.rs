use gtgan_core::eval::generate_targets;
use gtgan_core::graph::DirectedGraph;
use gtgan_core::layers::Activation;
use gtgan_core::model::ArchSpec;
use gtgan_core::synth::{make_dataset, DatasetKind};
use gtgan_core::train::{edge_f1, train_with_sink, TrainConfig};

fn main() {
    let n = 20;
    let ds = make_dataset(DatasetKind::Poisson, n, 20, 0.5, 42).unwrap();
    let pairs: Vec<_> = ds.train_pairs().cloned().collect();
    let inputs: Vec<DirectedGraph> = pairs.iter().map(|p| p.input.clone()).collect();
    let targets: Vec<DirectedGraph> = pairs.iter().map(|p| p.target.clone()).collect();
    let arch = ArchSpec::new(n).with_output_activation(Activation::Sigmoid);
    let cfg = TrainConfig {
        epochs: 0,
        max_steps: Some(20000),
        batch_size: 1,
        lr_g: 5e-3,
        lr_d: 3e-4,
        noise_dim: 0,
        seed: 1,
        checkpoint_every: Some(2000),
        ..TrainConfig::default()
    };
    let start = std::time::Instant::now();
    train_with_sink(&ds, &arch, &cfg, &mut |step, t, _| {
        let gen = generate_targets(t, &inputs, 7).unwrap();
        println!(
            "step {step}: f1={:.4} ({:.0}s)",
            edge_f1(&gen, &targets),
            start.elapsed().as_secs_f64()
        );
    })
    .unwrap();
}
