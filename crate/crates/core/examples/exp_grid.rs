use gtgan_core::eval::generate_targets;
use gtgan_core::graph::DirectedGraph;
use gtgan_core::layers::Activation;
use gtgan_core::model::ArchSpec;
use gtgan_core::synth::{make_dataset, DatasetKind};
use gtgan_core::train::{edge_f1, train, TrainConfig};

fn main() {
    let n = 20;
    let ds = make_dataset(DatasetKind::Poisson, n, 20, 0.5, 42).unwrap();
    let pairs: Vec<_> = ds.train_pairs().cloned().collect();
    let inputs: Vec<DirectedGraph> = pairs.iter().map(|p| p.input.clone()).collect();
    let targets: Vec<DirectedGraph> = pairs.iter().map(|p| p.target.clone()).collect();
    let arch = ArchSpec::new(n).with_output_activation(Activation::Sigmoid);

    for (lr_g, lr_d, batch, beta1, beta2, noise, seed) in [
        (5e-3, 3e-4, 1usize, 0.5, 0.9, 0usize, 1u64),
        (1e-2, 3e-4, 1, 0.5, 0.9, 0, 1),
        (5e-3, 1e-3, 2, 0.5, 0.9, 0, 1),
        (5e-3, 3e-4, 1, 0.9, 0.999, 0, 1),
        (5e-3, 3e-4, 1, 0.5, 0.999, 2, 1),
        (5e-3, 3e-4, 1, 0.5, 0.999, 0, 2),
        (5e-3, 3e-4, 1, 0.5, 0.999, 0, 3),
    ] {
        let cfg = TrainConfig {
            epochs: 0,
            max_steps: Some(2000),
            batch_size: batch,
            lr_g,
            lr_d,
            beta1,
            beta2,
            noise_dim: noise,
            seed,
            ..TrainConfig::default()
        };
        let (t, _, _) = train(&ds, &arch, &cfg).unwrap();
        let gen = generate_targets(&t, &inputs, 7).unwrap();
        println!(
            "lr_g={lr_g:.0e} lr_d={lr_d:.0e} b={batch} b1={beta1} b2={beta2} nz={noise} s={seed}: f1={:.4}",
            edge_f1(&gen, &targets),
        );
    }
}
