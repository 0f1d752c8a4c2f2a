use gtgan_core::eval::{direct_eval, indirect_eval, ClassifierTrainConfig};
use gtgan_core::layers::Activation;
use gtgan_core::model::{init_params, ArchSpec, Role};
use gtgan_core::synth::{make_dataset, DatasetKind};
use gtgan_core::train::{train, TrainConfig};
use std::time::Instant;

fn main() {
    let n = 30;
    let cfg_base = TrainConfig {
        epochs: 0,
        max_steps: Some(1200),
        batch_size: 8,
        lr_g: 5e-4,
        lr_d: 2e-3,
        noise_dim: 2,
        ..TrainConfig::default()
    };

    // criterion 6 + 8: Poisson n=30
    let ds = make_dataset(DatasetKind::Poisson, n, 200, 0.5, 7).unwrap();
    let arch = ArchSpec::new(n).with_output_activation(Activation::Sigmoid);
    for seed in [3u64, 4, 5] {
        let start = Instant::now();
        let cfg = TrainConfig { seed, ..cfg_base.clone() };
        let (t, _, _) = train(&ds, &arch, &cfg).unwrap();
        let direct = direct_eval(&t, &ds, 5).unwrap();
        let ccfg = ClassifierTrainConfig { epochs: 30, seed, ..Default::default() };
        let (a, b) = indirect_eval(&t, &ds, &ccfg, seed).unwrap();
        // untrained baseline for criterion 6's failure arm
        let arch2 = arch.clone().with_noise_dim(2);
        let unt = init_params(&arch2, Role::Translator, seed + 100).unwrap();
        let unt_direct = direct_eval(&unt, &ds, 5).unwrap();
        println!(
            "poisson seed={seed}: mean_k={:.2} (untrained {:.2}) wd={:.2} | A: auc={:.3} f1={:.3} B: auc={:.3} f1={:.3} ({:.0}s)",
            direct.k_stats.as_ref().unwrap().mean,
            unt_direct.k_stats.as_ref().unwrap().mean,
            direct.distances.wasserstein,
            a.auc, a.f1, b.auc, b.f1,
            start.elapsed().as_secs_f64()
        );
    }

    // criterion 7: scale-free n=30, trained vs untrained wasserstein
    let ds = make_dataset(DatasetKind::ScaleFree, n, 200, 0.5, 11).unwrap();
    for seed in [1u64, 2, 3] {
        let start = Instant::now();
        let cfg = TrainConfig { seed, ..cfg_base.clone() };
        let (t, _, _) = train(&ds, &arch, &cfg).unwrap();
        let trained = direct_eval(&t, &ds, 5).unwrap();
        let arch2 = arch.clone().with_noise_dim(2);
        let unt = init_params(&arch2, Role::Translator, seed + 100).unwrap();
        let untrained = direct_eval(&unt, &ds, 5).unwrap();
        println!(
            "scale-free seed={seed}: trained_wd={:.3} untrained_wd={:.3} ordered={} ({:.0}s)",
            trained.distances.wasserstein,
            untrained.distances.wasserstein,
            trained.distances.wasserstein < untrained.distances.wasserstein,
            start.elapsed().as_secs_f64()
        );
    }
}
