use gtgan_core::eval::{indirect_eval, ClassifierTrainConfig};
use gtgan_core::graph;
use gtgan_core::layers::Activation;
use gtgan_core::model::ArchSpec;
use gtgan_core::synth::{make_dataset, DatasetKind};
use gtgan_core::train::{train_with_sink, TrainConfig};

fn main() {
    let n = 30;
    let ds = make_dataset(DatasetKind::Poisson, n, 200, 0.5, 7).unwrap();
    let arch = ArchSpec::new(n).with_output_activation(Activation::Sigmoid);
    let seed = 3u64;
    let cfg = TrainConfig {
        epochs: 0,
        max_steps: Some(3600),
        batch_size: 8,
        lr_g: 5e-4,
        lr_d: 2e-3,
        noise_dim: 2,
        seed,
        checkpoint_every: Some(600),
        ..TrainConfig::default()
    };
    // real-target recip/density for reference
    let (mut rsum, mut dsum, mut cnt) = (0.0, 0.0, 0);
    for p in ds.test_pairs() {
        if let Ok(r) = graph::reciprocity(&p.target) {
            rsum += r;
            dsum += graph::density(&p.target).unwrap();
            cnt += 1;
        }
    }
    println!("real: recip={:.3} density={:.3}", rsum / cnt as f64, dsum / cnt as f64);
    train_with_sink(&ds, &arch, &cfg, &mut |step, t, _| {
        let inputs: Vec<_> = ds.test_pairs().map(|p| p.input.clone()).collect();
        let gen = gtgan_core::eval::generate_targets(t, &inputs, 5).unwrap();
        let (mut rsum, mut dsum, mut cnt) = (0.0, 0.0, 0);
        for g in &gen {
            let b = graph::binarize(g, 0.5).unwrap();
            if let Ok(r) = graph::reciprocity(&b) {
                rsum += r;
                dsum += graph::density(&b).unwrap();
                cnt += 1;
            }
        }
        let ccfg = ClassifierTrainConfig { epochs: 15, seed, ..Default::default() };
        let (a, b) = indirect_eval(t, &ds, &ccfg, seed).unwrap();
        println!(
            "step {step}: gen recip={:.3} density={:.3} | A auc={:.3} f1={:.3} | B f1={:.3}",
            rsum / cnt.max(1) as f64,
            dsum / cnt.max(1) as f64,
            a.auc, a.f1, b.f1
        );
    })
    .unwrap();
}
