use gtgan_core::eval::direct_eval;
use gtgan_core::layers::Activation;
use gtgan_core::model::ArchSpec;
use gtgan_core::synth::{make_dataset, DatasetKind};
use gtgan_core::train::{train, TrainConfig};

fn main() {
    let n = 30;
    let ds = make_dataset(DatasetKind::Poisson, n, 200, 0.5, 7).unwrap();
    let arch = ArchSpec::new(n).with_output_activation(Activation::Sigmoid);

    for (lr_g, lr_d, steps, seed) in [
        (5e-4, 1e-3, 1200usize, 3u64),
        (1e-3, 2e-3, 1200, 3),
        (5e-4, 2e-3, 1200, 3),
        (1e-3, 1e-3, 800, 3),
        (1e-3, 1e-3, 1200, 4),
        (1e-3, 1e-3, 1200, 5),
    ] {
        let cfg = TrainConfig {
            epochs: 0,
            max_steps: Some(steps),
            batch_size: 8,
            lr_g,
            lr_d,
            noise_dim: 2,
            seed,
            ..TrainConfig::default()
        };
        let start = std::time::Instant::now();
        let (t, _, hist) = train(&ds, &arch, &cfg).unwrap();
        let report = direct_eval(&t, &ds, 5).unwrap();
        let r = hist.records.last().unwrap();
        println!(
            "lr_g={lr_g:.0e} lr_d={lr_d:.0e} steps={steps} seed={seed}: mean_k={:.2} wd={:.2} d_real={:.2} d_fake={:.2} ({:.0}s)",
            report.k_stats.as_ref().map(|k| k.mean).unwrap_or(f64::NAN),
            report.distances.wasserstein,
            r.d_real_mean,
            r.d_fake_mean,
            start.elapsed().as_secs_f64()
        );
    }
}
