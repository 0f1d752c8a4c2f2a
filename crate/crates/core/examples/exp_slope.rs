use gtgan_core::graph::DirectedGraph;
use gtgan_core::layers::Activation;
use gtgan_core::model::{init_params, translator_backward, translator_forward, ArchSpec, Role};
use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use std::time::Instant;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn main() {
    let sizes = [16usize, 32, 64, 128];
    let mut points = Vec::new();
    for &n in &sizes {
        let arch = ArchSpec::new(n).with_output_activation(Activation::Sigmoid);
        let params = init_params(&arch, Role::Translator, 1).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let g = DirectedGraph::from_weights(Array2::from_shape_simple_fn((n, n), || {
            if rng.random::<f64>() < 0.1 { 1.0 } else { 0.0 }
        }))
        .unwrap();
        let noise: Vec<f64> = (0..2 * n).map(|_| rng.random::<f64>() - 0.5).collect();
        let grad = Array2::from_elem((n, n), 0.5);
        // warm up
        let (_, c) = translator_forward(&params, &g, &noise, true).unwrap();
        translator_backward(&params, &c.unwrap(), &grad).unwrap();
        let reps = 9;
        let mut times = Vec::with_capacity(reps);
        for _ in 0..reps {
            let t0 = Instant::now();
            let (_, c) = translator_forward(&params, &g, &noise, true).unwrap();
            translator_backward(&params, &c.unwrap(), &grad).unwrap();
            times.push(t0.elapsed().as_secs_f64());
        }
        let med = median(times);
        println!("n={n}: median {:.3} ms", med * 1e3);
        points.push(((n as f64).ln(), med.ln()));
    }
    let m = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    println!("slope = {:.3}", (m * sxy - sx * sy) / (m * sxx - sx * sx));
}
