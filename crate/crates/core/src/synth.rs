//! Seeded synthetic datasets of paired input/target graphs.
//!
//! Two families: scale-free pairs grown by a directed three-move
//! preferential-attachment process, and Poisson pairs where the target adds
//! `k * |E|` uniformly random edges to a Barabasi-Albert input with
//! `k ~ Poisson(lambda)`. Every pair derives its own seed from the dataset
//! seed, so generation is reproducible and order-independent.

use crate::error::SynthError;
use crate::graph::DirectedGraph;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// Which generator (or ingestion path) produced a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    ScaleFree,
    Poisson,
    Auth,
}

impl DatasetKind {
    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::ScaleFree => "scale_free",
            DatasetKind::Poisson => "poisson",
            DatasetKind::Auth => "auth",
        }
    }
}

/// Train/test assignment of one pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// One input/target graph pair plus open-ended generation metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphPair {
    pub input: DirectedGraph,
    pub target: DirectedGraph,
    pub meta: Map<String, Value>,
}

impl GraphPair {
    pub fn new(
        input: DirectedGraph,
        target: DirectedGraph,
        meta: Map<String, Value>,
    ) -> Result<Self, SynthError> {
        if input.n() != target.n() {
            return Err(SynthError::BadParameter {
                name: "target node count",
                value: target.n() as f64,
            });
        }
        Ok(Self { input, target, meta })
    }

    /// The sampled edge-increasing ratio, when recorded by the generator.
    pub fn meta_k(&self) -> Option<f64> {
        self.meta.get("k").and_then(Value::as_f64)
    }
}

/// A collection of pairs with a train/test split.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    kind: DatasetKind,
    pairs: Vec<GraphPair>,
    split: Vec<Split>,
}

impl Dataset {
    pub fn new(
        kind: DatasetKind,
        pairs: Vec<GraphPair>,
        split: Vec<Split>,
    ) -> Result<Self, SynthError> {
        if pairs.len() != split.len() {
            return Err(SynthError::BadParameter {
                name: "split length",
                value: split.len() as f64,
            });
        }
        if let Some(first) = pairs.first() {
            let n = first.input.n();
            if pairs.iter().any(|p| p.input.n() != n) {
                return Err(SynthError::BadParameter { name: "node count", value: n as f64 });
            }
        }
        Ok(Self { kind, pairs, split })
    }

    pub fn kind(&self) -> DatasetKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Shared node count, when the dataset is nonempty.
    pub fn n(&self) -> Option<usize> {
        self.pairs.first().map(|p| p.input.n())
    }

    pub fn pairs(&self) -> impl Iterator<Item = &GraphPair> {
        self.pairs.iter()
    }

    pub fn splits(&self) -> impl Iterator<Item = Split> + '_ {
        self.split.iter().copied()
    }

    pub fn split_of(&self, idx: usize) -> Split {
        self.split[idx]
    }

    pub fn train_pairs(&self) -> impl Iterator<Item = &GraphPair> {
        self.pairs
            .iter()
            .zip(&self.split)
            .filter(|(_, &s)| s == Split::Train)
            .map(|(p, _)| p)
    }

    pub fn test_pairs(&self) -> impl Iterator<Item = &GraphPair> {
        self.pairs
            .iter()
            .zip(&self.split)
            .filter(|(_, &s)| s == Split::Test)
            .map(|(p, _)| p)
    }
}

/// Generator parameters with the documented defaults.
#[derive(Debug, Clone, Copy)]
pub struct GenOptions {
    /// Probability of the existing-node edge move in the scale-free growth.
    pub beta: f64,
    /// Mean of the Poisson edge-increasing ratio.
    pub lambda: f64,
}

impl Default for GenOptions {
    fn default() -> Self {
        Self { beta: 0.54, lambda: 5.0 }
    }
}

/// Smoothing added to degrees when sampling preferential endpoints, so
/// fresh nodes can be selected on both sides.
const PREF_SMOOTHING: f64 = 1.0;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Splittable per-item seed derivation: independent streams for each index
/// under one master seed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(0x9E37_79B9_7F4A_7C15)))
}

/// Growing directed simple graph with degree-preferential sampling.
struct GrowState {
    n_max: usize,
    nodes: usize,
    present: Vec<bool>,
    in_deg: Vec<usize>,
    out_deg: Vec<usize>,
    edges: Vec<(usize, usize)>,
}

impl GrowState {
    fn new(n_max: usize) -> Self {
        Self {
            n_max,
            nodes: 0,
            present: vec![false; n_max * n_max],
            in_deg: vec![0; n_max],
            out_deg: vec![0; n_max],
            edges: Vec::new(),
        }
    }

    fn add_node(&mut self) -> usize {
        let v = self.nodes;
        self.nodes += 1;
        v
    }

    fn has_edge(&self, src: usize, dst: usize) -> bool {
        self.present[src * self.n_max + dst]
    }

    fn add_edge(&mut self, src: usize, dst: usize) {
        debug_assert!(src != dst && !self.has_edge(src, dst));
        self.present[src * self.n_max + dst] = true;
        self.out_deg[src] += 1;
        self.in_deg[dst] += 1;
        self.edges.push((src, dst));
    }

    fn pick_preferential(&self, degrees: &[usize], rng: &mut ChaCha12Rng) -> usize {
        let total: f64 =
            degrees[..self.nodes].iter().map(|&d| d as f64 + PREF_SMOOTHING).sum();
        let mut x = rng.random_range(0.0..total);
        for (v, &d) in degrees[..self.nodes].iter().enumerate() {
            x -= d as f64 + PREF_SMOOTHING;
            if x <= 0.0 {
                return v;
            }
        }
        self.nodes - 1
    }

    fn pick_by_in(&self, rng: &mut ChaCha12Rng) -> usize {
        self.pick_preferential(&self.in_deg, rng)
    }

    fn pick_by_out(&self, rng: &mut ChaCha12Rng) -> usize {
        self.pick_preferential(&self.out_deg, rng)
    }

    /// One attempt at the existing-node move: source by out-degree, target
    /// by in-degree; duplicate edges and self-loops are rejected.
    fn try_preferential_edge(&mut self, rng: &mut ChaCha12Rng) -> bool {
        let src = self.pick_by_out(rng);
        let dst = self.pick_by_in(rng);
        if src == dst || self.has_edge(src, dst) {
            return false;
        }
        self.add_edge(src, dst);
        true
    }

    fn to_graph(&self) -> DirectedGraph {
        let triples: Vec<(usize, usize, f64)> =
            self.edges.iter().map(|&(s, d)| (s, d, 1.0)).collect();
        DirectedGraph::new(self.nodes, &triples).expect("growth keeps edges valid")
    }
}

/// Generates one scale-free input/target pair.
///
/// The input grows from a directed triangle by three moves: new node with
/// an out-edge (in-degree-preferential target), an edge between existing
/// nodes with probability `beta`, or a new node with an in-edge
/// (out-degree-preferential source). The remaining probability splits
/// evenly between the two node moves. The target continues the input with
/// `|E(input)|` further existing-node edge moves, deduplicated, so its edge
/// count is `2|E(input)|` up to capacity.
pub fn gen_scale_free_pair(n: usize, beta: f64, seed: u64) -> Result<GraphPair, SynthError> {
    if n < 3 {
        return Err(SynthError::TooFewNodes(n));
    }
    if beta <= 0.0 || beta >= 1.0 {
        return Err(SynthError::BadParameter { name: "beta", value: beta });
    }
    let alpha = (1.0 - beta) / 2.0;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut g = GrowState::new(n);
    for _ in 0..3 {
        g.add_node();
    }
    g.add_edge(0, 1);
    g.add_edge(1, 2);
    g.add_edge(2, 0);

    while g.nodes < n {
        let u: f64 = rng.random();
        if u < alpha {
            let dst = g.pick_by_in(&mut rng);
            let v = g.add_node();
            g.add_edge(v, dst);
        } else if u < alpha + beta {
            g.try_preferential_edge(&mut rng);
        } else {
            let src = g.pick_by_out(&mut rng);
            let v = g.add_node();
            g.add_edge(src, v);
        }
    }
    let input = g.to_graph();

    let need = g.edges.len();
    let mut added = 0usize;
    let mut attempts = 0usize;
    while added < need && attempts < 200 * need {
        if g.try_preferential_edge(&mut rng) {
            added += 1;
        }
        attempts += 1;
    }
    let target = g.to_graph();

    let mut meta = Map::new();
    meta.insert("kind".into(), Value::from(DatasetKind::ScaleFree.name()));
    meta.insert("seed".into(), Value::from(seed));
    meta.insert("target_added".into(), Value::from(added as u64));
    GraphPair::new(input, target, meta)
}

/// Generates one Poisson input/target pair.
///
/// The input is a Barabasi-Albert graph with one attachment edge per new
/// node, oriented newer to older. The target adds `min(k*|E|, capacity)`
/// distinct uniformly random non-edges with `k ~ Poisson(lambda)`; the
/// sampled `k` lands in the pair metadata.
pub fn gen_poisson_pair(n: usize, lambda: f64, seed: u64) -> Result<GraphPair, SynthError> {
    if n < 3 {
        return Err(SynthError::TooFewNodes(n));
    }
    if lambda <= 0.0 {
        return Err(SynthError::BadParameter { name: "lambda", value: lambda });
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut g = GrowState::new(n);
    g.add_node();
    g.add_node();
    g.add_edge(1, 0);
    let mut total_deg = vec![0usize; n];
    total_deg[0] = 1;
    total_deg[1] = 1;
    while g.nodes < n {
        let v = g.add_node();
        // attach by total degree over the pre-existing nodes
        let total: f64 = total_deg[..v].iter().map(|&d| d as f64).sum();
        let mut x = rng.random_range(0.0..total);
        let mut dst = v - 1;
        for (u, &d) in total_deg[..v].iter().enumerate() {
            x -= d as f64;
            if x <= 0.0 {
                dst = u;
                break;
            }
        }
        g.add_edge(v, dst);
        total_deg[v] += 1;
        total_deg[dst] += 1;
    }
    let input = g.to_graph();
    let edge_count = g.edges.len();

    let k = Poisson::new(lambda)
        .map_err(|_| SynthError::BadParameter { name: "lambda", value: lambda })?
        .sample(&mut rng) as u64;
    let capacity = n * (n - 1) - edge_count;
    let want = (k as usize).saturating_mul(edge_count);
    let added = want.min(capacity);

    let mut non_edges: Vec<(usize, usize)> = Vec::with_capacity(capacity);
    for i in 0..n {
        for j in 0..n {
            if i != j && !g.has_edge(i, j) {
                non_edges.push((i, j));
            }
        }
    }
    // partial Fisher-Yates: the first `added` entries are a uniform sample
    for idx in 0..added {
        let j = rng.random_range(idx..non_edges.len());
        non_edges.swap(idx, j);
    }
    for &(src, dst) in &non_edges[..added] {
        g.add_edge(src, dst);
    }
    let target = g.to_graph();

    let mut meta = Map::new();
    meta.insert("kind".into(), Value::from(DatasetKind::Poisson.name()));
    meta.insert("seed".into(), Value::from(seed));
    meta.insert("k".into(), Value::from(k));
    meta.insert("added".into(), Value::from(added as u64));
    meta.insert("capped".into(), Value::from(want > capacity));
    GraphPair::new(input, target, meta)
}

/// Generates `count` pairs with per-pair derived seeds and a seeded
/// shuffled train/test split: the first `floor(count * train_fraction)`
/// positions of the shuffle become the train split.
pub fn make_dataset(
    kind: DatasetKind,
    n: usize,
    count: usize,
    train_fraction: f64,
    seed: u64,
) -> Result<Dataset, SynthError> {
    make_dataset_with(kind, n, count, train_fraction, seed, &GenOptions::default())
}

pub fn make_dataset_with(
    kind: DatasetKind,
    n: usize,
    count: usize,
    train_fraction: f64,
    seed: u64,
    opts: &GenOptions,
) -> Result<Dataset, SynthError> {
    if count < 2 {
        return Err(SynthError::TooFewPairs(count));
    }
    if train_fraction <= 0.0 || train_fraction >= 1.0 {
        return Err(SynthError::BadTrainFraction(train_fraction));
    }
    let pairs: Vec<GraphPair> = (0..count)
        .map(|i| {
            let pair_seed = derive_seed(seed, i as u64);
            match kind {
                DatasetKind::ScaleFree => gen_scale_free_pair(n, opts.beta, pair_seed),
                DatasetKind::Poisson => gen_poisson_pair(n, opts.lambda, pair_seed),
                DatasetKind::Auth => {
                    Err(SynthError::BadParameter { name: "kind auth is ingested, not generated", value: 0.0 })
                }
            }
        })
        .collect::<Result<_, _>>()?;

    let mut order: Vec<usize> = (0..count).collect();
    let mut split_rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, u64::MAX));
    order.shuffle(&mut split_rng);
    let train_count = (count as f64 * train_fraction).floor() as usize;
    let mut split = vec![Split::Test; count];
    for &idx in &order[..train_count] {
        split[idx] = Split::Train;
    }
    Dataset::new(kind, pairs, split)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_free_minimal_size() {
        let pair = gen_scale_free_pair(3, 0.54, 7).unwrap();
        assert_eq!(pair.input.n(), 3);
        assert!(pair.input.edge_count() >= 2);
        // the triangle seed has 3 edges; doubling saturates K3 exactly
        assert_eq!(pair.input.edge_count(), 3);
        assert_eq!(pair.target.edge_count(), 6);
    }

    #[test]
    fn scale_free_is_deterministic() {
        let a = gen_scale_free_pair(20, 0.54, 11).unwrap();
        let b = gen_scale_free_pair(20, 0.54, 11).unwrap();
        assert_eq!(a, b);
        let c = gen_scale_free_pair(20, 0.54, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn scale_free_target_doubles_edges() {
        for seed in 0..10 {
            let pair = gen_scale_free_pair(25, 0.54, seed).unwrap();
            let e_in = pair.input.edge_count();
            let e_out = pair.target.edge_count();
            let capacity = 25 * 24;
            assert_eq!(e_out, (2 * e_in).min(capacity), "seed {seed}");
        }
    }

    #[test]
    fn poisson_pair_edge_arithmetic() {
        for seed in 0..20 {
            let pair = gen_poisson_pair(15, 5.0, seed).unwrap();
            let k = pair.meta_k().unwrap() as usize;
            let e_in = pair.input.edge_count();
            assert_eq!(e_in, 14, "BA with one edge per node");
            let capacity = 15 * 14 - e_in;
            let expect = e_in + (k * e_in).min(capacity);
            assert_eq!(pair.target.edge_count(), expect, "seed {seed}");
            let capped = pair.meta.get("capped").unwrap().as_bool().unwrap();
            assert_eq!(capped, k * e_in > capacity);
        }
    }

    #[test]
    fn poisson_tiny_lambda_keeps_target_equal() {
        let pair = gen_poisson_pair(10, 1e-9, 3).unwrap();
        assert_eq!(pair.meta_k().unwrap(), 0.0);
        assert_eq!(pair.input, pair.target);
    }

    #[test]
    fn poisson_k_mean_near_lambda() {
        let mut sum = 0.0;
        let count = 2000;
        for i in 0..count {
            let pair = gen_poisson_pair(5, 5.0, derive_seed(99, i)).unwrap();
            sum += pair.meta_k().unwrap();
        }
        let mean = sum / count as f64;
        assert!((4.7..=5.3).contains(&mean), "mean k = {mean}");
    }

    #[test]
    fn pairs_only_add_edges_and_stay_simple() {
        for seed in 0..15 {
            let sf = gen_scale_free_pair(18, 0.54, seed).unwrap();
            let po = gen_poisson_pair(18, 5.0, seed).unwrap();
            for pair in [sf, po] {
                assert_eq!(pair.input.n(), pair.target.n());
                for (i, j, _) in pair.input.edges() {
                    assert!(pair.target.has_edge(i, j), "target lost edge ({i},{j})");
                }
                for g in [&pair.input, &pair.target] {
                    for i in 0..g.n() {
                        assert!(!g.has_edge(i, i), "self-loop at {i}");
                    }
                    // weights are exactly 0/1, so no duplicate accumulation
                    assert!(g.weights().iter().all(|&w| w == 0.0 || w == 1.0));
                }
            }
        }
    }

    #[test]
    fn dataset_split_arithmetic() {
        let ds = make_dataset(DatasetKind::Poisson, 8, 10, 0.5, 4).unwrap();
        assert_eq!(ds.train_pairs().count(), 5);
        assert_eq!(ds.test_pairs().count(), 5);
        assert_eq!(ds.len(), 10);

        let big = make_dataset(DatasetKind::Poisson, 5, 5000, 0.4, 1).unwrap();
        assert_eq!(big.train_pairs().count(), 2000);
        assert_eq!(big.test_pairs().count(), 3000);
    }

    #[test]
    fn dataset_is_deterministic() {
        let a = make_dataset(DatasetKind::ScaleFree, 12, 20, 0.3, 9).unwrap();
        let b = make_dataset(DatasetKind::ScaleFree, 12, 20, 0.3, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dataset_rejects_bad_arguments() {
        assert!(make_dataset(DatasetKind::Poisson, 8, 1, 0.5, 0).is_err());
        assert!(make_dataset(DatasetKind::Poisson, 8, 10, 0.0, 0).is_err());
        assert!(make_dataset(DatasetKind::Poisson, 8, 10, 1.0, 0).is_err());
        assert!(make_dataset(DatasetKind::Auth, 8, 10, 0.5, 0).is_err());
        assert!(gen_scale_free_pair(2, 0.54, 0).is_err());
    }
}
