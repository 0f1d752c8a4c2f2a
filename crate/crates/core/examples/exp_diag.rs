use gtgan_core::eval::generate_targets;
use gtgan_core::graph::{self, DirectedGraph};
use gtgan_core::layers::Activation;
use gtgan_core::model::ArchSpec;
use gtgan_core::synth::{make_dataset, DatasetKind};
use gtgan_core::train::{edge_f1, train_with_sink, TrainConfig};

fn density_of(gs: &[DirectedGraph]) -> f64 {
    gs.iter().map(|g| graph::density(&graph::binarize(g, 0.5).unwrap()).unwrap()).sum::<f64>()
        / gs.len() as f64
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let lr_g: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(1e-3);
    let lr_d: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(1e-3);
    let noise_dim: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(0);
    let steps: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(1000);

    let n = 20;
    let ds = make_dataset(DatasetKind::Poisson, n, 20, 0.5, 42).unwrap();
    let pairs: Vec<_> = ds.train_pairs().cloned().collect();
    let inputs: Vec<DirectedGraph> = pairs.iter().map(|p| p.input.clone()).collect();
    let targets: Vec<DirectedGraph> = pairs.iter().map(|p| p.target.clone()).collect();
    println!("target density {:.3}", density_of(&targets));

    let arch = ArchSpec::new(n).with_output_activation(Activation::Sigmoid);
    let cfg = TrainConfig {
        epochs: 0,
        max_steps: Some(steps),
        batch_size: 10,
        lr_g,
        lr_d,
        noise_dim,
        seed: 1,
        checkpoint_every: Some(100),
        ..TrainConfig::default()
    };
    let (_, _, hist) = train_with_sink(&ds, &arch, &cfg, &mut |step, t, _| {
        let gen = generate_targets(t, &inputs, 7).unwrap();
        println!(
            "step {step}: f1={:.4} gen_density={:.3}",
            edge_f1(&gen, &targets),
            density_of(&gen)
        );
    })
    .unwrap();
    let r = hist.records.last().unwrap();
    println!("d_real={:.3} d_fake={:.3}", r.d_real_mean, r.d_fake_mean);
}
