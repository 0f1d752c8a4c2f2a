use gtgan_core::graph::DirectedGraph;
use gtgan_core::layers::Activation;
use gtgan_core::model::{init_params, translator_backward, translator_forward, ArchSpec, Role};
use gtgan_core::synth::{make_dataset, DatasetKind};
use gtgan_core::train::{adam_step, edge_f1, AdamState};
use std::time::Instant;

fn main() {
    let n = 20;
    let ds = make_dataset(DatasetKind::Poisson, n, 20, 0.5, 42).unwrap();
    let pairs: Vec<_> = ds.train_pairs().cloned().collect();
    let arch = ArchSpec::new(n)
        .with_output_activation(Activation::Sigmoid)
        .with_noise_dim(0);
    let mut params = init_params(&arch, Role::Translator, 1).unwrap();
    let mut flat = params.flatten();
    let mut adam = AdamState::new(flat.len());
    let start = Instant::now();
    let noise: Vec<f64> = vec![];
    for step in 0..2000 {
        let mut grads = vec![0.0; flat.len()];
        for pair in &pairs {
            let (out, cache) = translator_forward(&params, &pair.input, &noise, true).unwrap();
            // BCE on each edge: dL/dp = (p - y) / (p (1-p)); through sigmoid
            // backward the layer already multiplies p(1-p), so pass raw
            let grad_out = out
                .weights()
                .iter()
                .zip(pair.target.weights().iter())
                .map(|(&p, &y)| {
                    let pc = p.clamp(1e-7, 1.0 - 1e-7);
                    (pc - y) / (pc * (1.0 - pc)) / pairs.len() as f64
                })
                .collect::<Vec<f64>>();
            let grad_out = ndarray::Array2::from_shape_vec((n, n), grad_out).unwrap();
            let g = translator_backward(&params, &cache.unwrap(), &grad_out).unwrap();
            for (a, b) in grads.iter_mut().zip(g.flatten()) { *a += b; }
        }
        adam_step(&mut flat, &grads, &mut adam, 2e-3, 0.9, 0.999, 1e-8).unwrap();
        params.set_from_flat(&flat).unwrap();
        if (step + 1) % 400 == 0 {
            let gen: Vec<DirectedGraph> = pairs
                .iter()
                .map(|p| translator_forward(&params, &p.input, &noise, false).unwrap().0)
                .collect();
            let targets: Vec<DirectedGraph> = pairs.iter().map(|p| p.target.clone()).collect();
            println!(
                "step {}: f1={:.4} elapsed={:.1}s",
                step + 1,
                edge_f1(&gen, &targets),
                start.elapsed().as_secs_f64()
            );
        }
    }
}
