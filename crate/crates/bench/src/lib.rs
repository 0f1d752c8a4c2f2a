//! Shared fixtures for the benchmark suite: seeded random graphs and
//! freshly initialized models at a given node count.

use gtgan_core::graph::DirectedGraph;
use gtgan_core::layers::Activation;
use gtgan_core::model::{init_params, ArchSpec, ModelParams, Role};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// A random 0/1 directed graph with roughly the given density.
pub fn random_graph(n: usize, density: f64, seed: u64) -> DirectedGraph {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random::<f64>() < density {
                edges.push((i, j, 1.0));
            }
        }
    }
    DirectedGraph::new(n, &edges).expect("generated edges are valid")
}

/// Translator with default shapes at node count `n`.
pub fn translator(n: usize, seed: u64) -> ModelParams {
    let arch = ArchSpec::new(n).with_output_activation(Activation::Sigmoid);
    init_params(&arch, Role::Translator, seed).expect("default arch is valid")
}

/// Discriminator with default shapes at node count `n`.
pub fn discriminator(n: usize, seed: u64) -> ModelParams {
    let arch = ArchSpec::new(n);
    init_params(&arch, Role::Discriminator, seed).expect("default arch is valid")
}

/// Standard-normal noise vector for a translator at node count `n`.
pub fn noise_for(model: &ModelParams, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..model.arch.noise_dim * model.arch.n).map(|_| rng.random::<f64>() - 0.5).collect()
}
