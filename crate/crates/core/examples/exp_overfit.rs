use gtgan_core::eval::generate_targets;
use gtgan_core::graph::DirectedGraph;
use gtgan_core::layers::Activation;
use gtgan_core::model::ArchSpec;
use gtgan_core::synth::{make_dataset, DatasetKind};
use gtgan_core::train::{edge_f1, train_with_sink, GeneratorLoss, TrainConfig};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let lr_g: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(1e-3);
    let lr_d: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(1e-3);
    let batch: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(10);
    let seed: u64 = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(1);
    let steps: usize = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(2000);

    let n = 20;
    let ds = make_dataset(DatasetKind::Poisson, n, 20, 0.5, 42).unwrap();
    let train_pairs: Vec<_> = ds.train_pairs().cloned().collect();
    let inputs: Vec<DirectedGraph> = train_pairs.iter().map(|p| p.input.clone()).collect();
    let targets: Vec<DirectedGraph> = train_pairs.iter().map(|p| p.target.clone()).collect();

    let arch = ArchSpec::new(n).with_output_activation(Activation::Sigmoid);
    let cfg = TrainConfig {
        epochs: 0,
        max_steps: Some(steps),
        batch_size: batch,
        lr_g,
        lr_d,
        seed,
        noise_dim: 2,
        generator_loss: GeneratorLoss::NonSaturating,
        checkpoint_every: Some(250),
        ..TrainConfig::default()
    };
    let start = Instant::now();
    let (t, _, hist) = train_with_sink(&ds, &arch, &cfg, &mut |step, t, _| {
        let gen = generate_targets(t, &inputs, 7).unwrap();
        let f1 = edge_f1(&gen, &targets);
        println!("step {step}: f1={f1:.4} elapsed={:.1}s", start.elapsed().as_secs_f64());
    })
    .unwrap();
    let gen = generate_targets(&t, &inputs, 7).unwrap();
    let r = hist.records.last().unwrap();
    println!(
        "final f1={:.4} in {:.1}s; loss_d={:.4} loss_g={:.4} d_real={:.3} d_fake={:.3}",
        edge_f1(&gen, &targets),
        start.elapsed().as_secs_f64(),
        r.loss_d, r.loss_g, r.d_real_mean, r.d_fake_mean
    );
}
