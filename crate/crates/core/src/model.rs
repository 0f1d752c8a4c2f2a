//! Model assembly: the graph translator (encoder/decoder with skip
//! connections and bottleneck noise) and the conditional discriminator,
//! plus initialization, parameter flattening, and checkpoints.
//!
//! Default shapes, edge maps x channels:
//! translator `NxNx1 -> NxNx5 -> NxNx10 -> Nx1x10 -> NxNx10 -> NxNx5 ->
//! NxNx1`; discriminator `NxNx1 -> NxNx5 -> NxNx10 -> Nx1x10 -> 1x1x10`
//! per input channel, with the two channels running through separate
//! edge-to-edge stacks before a shared edge-to-node layer.

use crate::error::ModelError;
use crate::graph::DirectedGraph;
use crate::layers::{
    dense_backward, dense_backward_from_pre, dense_forward_cached, e2e_conv_backward,
    e2e_conv_forward_cached, e2e_deconv_backward, e2e_deconv_forward_cached, e2n_conv_backward,
    e2n_conv_forward_cached, n2e_deconv_backward, n2e_deconv_forward_cached,
    node_to_graph_backward, node_to_graph_forward_cached, Activation, DenseCache, DenseGrads,
    DenseParams, EdgeToEdgeCache, EdgeToNodeCache, FeatureTensor, KernelGrads, LayerKernels,
    LayerKind, NodeTensor, NodeToEdgeCache, NodeToGraphCache,
};
use ndarray::{Array1, Array2, Array3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

/// How encoder activations reach the decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SkipMode {
    /// Element-wise addition onto the size-matched decoder pre-activation.
    Add,
    /// Plain encoder-decoder, for ablation.
    None,
}

/// Which network a parameter set belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Translator,
    Discriminator,
    /// Discriminator backbone without the conditioning channel; used by
    /// the indirect-evaluation transfer classifiers.
    Classifier,
}

/// Architecture descriptor for both networks at a fixed node count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub n: usize,
    /// Edge-map counts through the encoder convolutions, input included.
    pub encoder_channels: Vec<usize>,
    /// Node maps at the bottleneck.
    pub node_channels: usize,
    /// Edge-map counts through the decoder deconvolutions, output included.
    pub decoder_channels: Vec<usize>,
    /// Edge-map counts of each discriminator channel stack, input included.
    pub disc_edge_channels: Vec<usize>,
    pub disc_node_channels: usize,
    pub disc_graph_channels: usize,
    /// Width of the fully-connected layer before the final score.
    pub fc_width: usize,
    /// Node maps of noise appended at the bottleneck.
    pub noise_dim: usize,
    pub skip_mode: SkipMode,
    /// Final translator activation; relu or sigmoid so weights stay
    /// nonnegative.
    pub output_activation: Activation,
}

impl ArchSpec {
    /// Default shapes at node count `n`.
    pub fn new(n: usize) -> Self {
        Self {
            n,
            encoder_channels: vec![1, 5, 10],
            node_channels: 10,
            decoder_channels: vec![10, 5, 1],
            disc_edge_channels: vec![1, 5, 10],
            disc_node_channels: 10,
            disc_graph_channels: 10,
            fc_width: 64,
            noise_dim: 2,
            skip_mode: SkipMode::Add,
            output_activation: Activation::Relu,
        }
    }

    pub fn with_noise_dim(mut self, noise_dim: usize) -> Self {
        self.noise_dim = noise_dim;
        self
    }

    pub fn with_skip_mode(mut self, skip_mode: SkipMode) -> Self {
        self.skip_mode = skip_mode;
        self
    }

    pub fn with_output_activation(mut self, act: Activation) -> Self {
        self.output_activation = act;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n < 2 {
            return Err(ModelError::InvalidArch(format!("n must be >= 2, got {}", self.n)));
        }
        if self.encoder_channels.len() < 2 || self.encoder_channels[0] != 1 {
            return Err(ModelError::InvalidArch(
                "encoder channels must start at 1 and hold at least one layer".into(),
            ));
        }
        if self.decoder_channels.len() < 2 || *self.decoder_channels.last().unwrap() != 1 {
            return Err(ModelError::InvalidArch(
                "decoder channels must end at 1 and hold at least one layer".into(),
            ));
        }
        if self.disc_edge_channels.len() < 2 || self.disc_edge_channels[0] != 1 {
            return Err(ModelError::InvalidArch(
                "discriminator channels must start at 1 and hold at least one layer".into(),
            ));
        }
        if self.node_channels == 0
            || self.disc_node_channels == 0
            || self.disc_graph_channels == 0
            || self.fc_width == 0
        {
            return Err(ModelError::InvalidArch("channel widths must be positive".into()));
        }
        if self.encoder_channels.iter().any(|&c| c == 0)
            || self.decoder_channels.iter().any(|&c| c == 0)
            || self.disc_edge_channels.iter().any(|&c| c == 0)
        {
            return Err(ModelError::InvalidArch("channel widths must be positive".into()));
        }
        if self.output_activation == Activation::Linear {
            return Err(ModelError::InvalidArch(
                "output activation must be relu or sigmoid to keep weights nonnegative".into(),
            ));
        }
        if self.skip_mode == SkipMode::Add {
            // each skipped decoder layer must match its encoder counterpart
            let mut rev = self.encoder_channels.clone();
            rev.reverse();
            if rev != self.decoder_channels {
                return Err(ModelError::InvalidArch(format!(
                    "skip mode add needs mirrored channels, encoder {:?} vs decoder {:?}",
                    self.encoder_channels, self.decoder_channels
                )));
            }
        }
        Ok(())
    }

    fn encoder_conv_count(&self) -> usize {
        self.encoder_channels.len() - 1
    }

    /// Decoder layers are indexed 0.. with 0 the node-to-edge deconvolution;
    /// returns the encoder conv whose output is added at that layer, if any.
    fn skip_source(&self, dec_idx: usize) -> Option<usize> {
        if self.skip_mode != SkipMode::Add {
            return None;
        }
        let enc = self.encoder_conv_count();
        (dec_idx < enc).then(|| enc - 1 - dec_idx)
    }
}

/// One parameterized layer of a network.
#[derive(Debug, Clone)]
pub enum Layer {
    Graph { kind: LayerKind, kernels: LayerKernels },
    Pool { kernels: LayerKernels },
    Dense(DenseParams),
}

/// Gradients matching one [`Layer`].
#[derive(Debug, Clone)]
pub enum LayerGrads {
    Kernels(KernelGrads),
    Dense(DenseGrads),
}

/// Full parameter set of one network.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub arch: ArchSpec,
    pub role: Role,
    pub layers: Vec<Layer>,
}

/// Gradients for every layer of one network, in layer order.
#[derive(Debug, Clone)]
pub struct ModelGrads {
    pub layers: Vec<LayerGrads>,
}

#[derive(Debug, Clone, Copy)]
enum LayerTemplate {
    Graph { kind: LayerKind, m_in: usize, m_out: usize, activation: Activation },
    Pool { m_in: usize, m_out: usize, activation: Activation },
    Dense { d_in: usize, d_out: usize, activation: Activation },
}

/// Hidden activation of translator layers.
const TRANSLATOR_HIDDEN_ACT: Activation = Activation::Relu;

/// Hidden activation of discriminator and classifier layers. Sigmoid
/// rather than relu: a relu critic can push every fake into a dead region,
/// zeroing the gradient the generator trains on, while sigmoid derivatives
/// never vanish exactly.
const CRITIC_HIDDEN_ACT: Activation = Activation::Sigmoid;

fn templates(arch: &ArchSpec, role: Role) -> Vec<LayerTemplate> {
    use LayerKind::*;
    let mut out = Vec::new();
    match role {
        Role::Translator => {
            let hidden = TRANSLATOR_HIDDEN_ACT;
            for w in arch.encoder_channels.windows(2) {
                out.push(LayerTemplate::Graph {
                    kind: EdgeToEdgeConv,
                    m_in: w[0],
                    m_out: w[1],
                    activation: hidden,
                });
            }
            out.push(LayerTemplate::Graph {
                kind: EdgeToNodeConv,
                m_in: *arch.encoder_channels.last().unwrap(),
                m_out: arch.node_channels,
                activation: hidden,
            });
            out.push(LayerTemplate::Graph {
                kind: NodeToEdgeDeconv,
                m_in: arch.node_channels + arch.noise_dim,
                m_out: arch.decoder_channels[0],
                activation: hidden,
            });
            let last_dec = arch.decoder_channels.len() - 2;
            for (i, w) in arch.decoder_channels.windows(2).enumerate() {
                out.push(LayerTemplate::Graph {
                    kind: EdgeToEdgeDeconv,
                    m_in: w[0],
                    m_out: w[1],
                    activation: if i == last_dec { arch.output_activation } else { hidden },
                });
            }
        }
        Role::Discriminator | Role::Classifier => {
            let hidden = CRITIC_HIDDEN_ACT;
            let stacks = if role == Role::Discriminator { 2 } else { 1 };
            for _ in 0..stacks {
                for w in arch.disc_edge_channels.windows(2) {
                    out.push(LayerTemplate::Graph {
                        kind: EdgeToEdgeConv,
                        m_in: w[0],
                        m_out: w[1],
                        activation: hidden,
                    });
                }
            }
            out.push(LayerTemplate::Graph {
                kind: EdgeToNodeConv,
                m_in: stacks * arch.disc_edge_channels.last().unwrap(),
                m_out: arch.disc_node_channels,
                activation: hidden,
            });
            out.push(LayerTemplate::Pool {
                m_in: arch.disc_node_channels,
                m_out: arch.disc_graph_channels,
                activation: hidden,
            });
            out.push(LayerTemplate::Dense {
                d_in: arch.disc_graph_channels,
                d_out: arch.fc_width,
                activation: hidden,
            });
            out.push(LayerTemplate::Dense {
                d_in: arch.fc_width,
                d_out: 1,
                activation: Activation::Sigmoid,
            });
        }
    }
    out
}

/// Kernel entries contributing to (fan in) or fed by (fan out) a single
/// value, per layer kind; drives the uniform initialization bound.
fn fans(t: &LayerTemplate, n: usize) -> (usize, usize) {
    match *t {
        LayerTemplate::Graph { kind, m_in, m_out, .. } => match kind {
            LayerKind::EdgeToEdgeConv | LayerKind::EdgeToEdgeDeconv => {
                (2 * n * m_in, 2 * n * m_out)
            }
            LayerKind::EdgeToNodeConv => (2 * n * m_in, 2 * m_out),
            LayerKind::NodeToEdgeDeconv => (2 * m_in, 2 * n * m_out),
            _ => unreachable!("graph layer"),
        },
        LayerTemplate::Pool { m_in, m_out, .. } => (n * m_in, m_out),
        LayerTemplate::Dense { d_in, d_out, .. } => (d_in, d_out),
    }
}

fn init_layer(t: &LayerTemplate, n: usize, rng: &mut ChaCha12Rng) -> Layer {
    let (fan_in, fan_out) = fans(t, n);
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    match *t {
        LayerTemplate::Graph { kind, m_in, m_out, activation } => Layer::Graph {
            kind,
            kernels: LayerKernels::random(m_in, m_out, n, bound, activation, rng),
        },
        LayerTemplate::Pool { m_in, m_out, activation } => {
            let phi =
                Array3::from_shape_simple_fn((m_in, m_out, n), || rng.random_range(-bound..bound));
            Layer::Pool {
                kernels: LayerKernels {
                    phi,
                    psi: Array3::zeros((m_in, m_out, 0)),
                    bias: Array1::zeros(m_out),
                    activation,
                },
            }
        }
        LayerTemplate::Dense { d_in, d_out, activation } => Layer::Dense(DenseParams {
            weights: Array2::from_shape_simple_fn((d_out, d_in), || {
                rng.random_range(-bound..bound)
            }),
            bias: Array1::zeros(d_out),
            activation,
        }),
    }
}

/// Initializes all layer parameters: kernels i.i.d. uniform on
/// [-sqrt(6/(fan_in+fan_out)), +...], biases zero; deterministic per seed.
pub fn init_params(arch: &ArchSpec, role: Role, seed: u64) -> Result<ModelParams, ModelError> {
    arch.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let layers = templates(arch, role).iter().map(|t| init_layer(t, arch.n, &mut rng)).collect();
    Ok(ModelParams { arch: arch.clone(), role, layers })
}

/// Exact number of scalar parameters for the given architecture and role.
pub fn param_count(arch: &ArchSpec, role: Role) -> usize {
    let n = arch.n;
    templates(arch, role)
        .iter()
        .map(|t| match *t {
            LayerTemplate::Graph { m_in, m_out, .. } => m_in * m_out * 2 * n + m_out,
            LayerTemplate::Pool { m_in, m_out, .. } => m_in * m_out * n + m_out,
            LayerTemplate::Dense { d_in, d_out, .. } => d_out * d_in + d_out,
        })
        .sum()
}

impl ModelParams {
    /// All parameters as one vector: layers in forward order; per graph
    /// layer phi (input-map-major), then psi, then bias; dense weights
    /// row-major then bias.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(param_count(&self.arch, self.role));
        for layer in &self.layers {
            match layer {
                Layer::Graph { kernels, .. } | Layer::Pool { kernels } => {
                    out.extend(kernels.phi.iter());
                    out.extend(kernels.psi.iter());
                    out.extend(kernels.bias.iter());
                }
                Layer::Dense(p) => {
                    out.extend(p.weights.iter());
                    out.extend(p.bias.iter());
                }
            }
        }
        out
    }

    /// Overwrites all parameters from a flat vector in [`flatten`] order.
    pub fn set_from_flat(&mut self, flat: &[f64]) -> Result<(), ModelError> {
        let expected = param_count(&self.arch, self.role);
        if flat.len() != expected {
            return Err(ModelError::ShapeMismatch(format!(
                "flat parameter vector has length {}, expected {}",
                flat.len(),
                expected
            )));
        }
        let mut pos = 0;
        let mut take = |dst: &mut [f64]| {
            dst.copy_from_slice(&flat[pos..pos + dst.len()]);
            pos += dst.len();
        };
        for layer in &mut self.layers {
            match layer {
                Layer::Graph { kernels, .. } | Layer::Pool { kernels } => {
                    take(kernels.phi.as_slice_mut().unwrap());
                    take(kernels.psi.as_slice_mut().unwrap());
                    take(kernels.bias.as_slice_mut().unwrap());
                }
                Layer::Dense(p) => {
                    take(p.weights.as_slice_mut().unwrap());
                    take(p.bias.as_slice_mut().unwrap());
                }
            }
        }
        Ok(())
    }

    pub fn from_flat(
        arch: &ArchSpec,
        role: Role,
        flat: &[f64],
    ) -> Result<ModelParams, ModelError> {
        let mut params = init_params(arch, role, 0)?;
        params.set_from_flat(flat)?;
        Ok(params)
    }

    fn graph_kernels(&self, idx: usize) -> &LayerKernels {
        match &self.layers[idx] {
            Layer::Graph { kernels, .. } | Layer::Pool { kernels } => kernels,
            Layer::Dense(_) => panic!("layer {idx} is dense"),
        }
    }

    fn dense_params(&self, idx: usize) -> &DenseParams {
        match &self.layers[idx] {
            Layer::Dense(p) => p,
            _ => panic!("layer {idx} is not dense"),
        }
    }
}

impl ModelGrads {
    /// Same coordinate order as [`ModelParams::flatten`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                LayerGrads::Kernels(k) => {
                    out.extend(k.phi.iter());
                    out.extend(k.psi.iter());
                    out.extend(k.bias.iter());
                }
                LayerGrads::Dense(d) => {
                    out.extend(d.weights.iter());
                    out.extend(d.bias.iter());
                }
            }
        }
        out
    }
}

/// Forward cache of one translator evaluation.
#[derive(Debug, Clone)]
pub struct TranslatorCache {
    enc: Vec<EdgeToEdgeCache>,
    e2n: EdgeToNodeCache,
    dec_n2e: NodeToEdgeCache,
    dec_e2e: Vec<EdgeToEdgeCache>,
}

impl TranslatorCache {
    /// Evaluated tensor shapes as (rows, cols, maps), input first and one
    /// entry per layer output; node tensors report as N x 1 x maps.
    pub fn shape_trace(&self) -> Vec<(usize, usize, usize)> {
        let n = self.e2n.input.n;
        let mut trace = vec![(n, n, self.enc.first().map_or(1, |c| c.input.map_count()))];
        for c in &self.enc {
            trace.push((n, n, c.pre.map_count()));
        }
        trace.push((n, 1, self.e2n.pre.map_count()));
        trace.push((n, n, self.dec_n2e.pre.map_count()));
        for c in &self.dec_e2e {
            trace.push((n, n, c.pre.map_count()));
        }
        trace
    }
}

fn add_tensors(a: &FeatureTensor, b: &FeatureTensor) -> FeatureTensor {
    debug_assert_eq!(a.map_count(), b.map_count());
    FeatureTensor {
        n: a.n,
        maps: a.maps.iter().zip(&b.maps).map(|(x, y)| x + y).collect(),
    }
}

fn apply_edge_activation(pre: &FeatureTensor, act: Activation) -> FeatureTensor {
    FeatureTensor { n: pre.n, maps: pre.maps.iter().map(|m| m.mapv(|v| act.apply(v))).collect() }
}

/// Gradient with respect to a layer's pre-activation, which is also the
/// gradient reaching anything added into that pre-activation (skips).
fn grad_wrt_pre(pre: &FeatureTensor, grad_out: &FeatureTensor, act: Activation) -> FeatureTensor {
    FeatureTensor {
        n: pre.n,
        maps: pre
            .maps
            .iter()
            .zip(&grad_out.maps)
            .map(|(p, g)| {
                let mut gp = g.clone();
                gp.zip_mut_with(p, |gv, &pv| *gv *= act.grad_at_pre(pv));
                gp
            })
            .collect(),
    }
}

/// Runs the translator on one input graph.
///
/// `noise` must hold `noise_dim * n` values; they become extra node maps at
/// the bottleneck. Skip mode `add` sums each encoder activation onto the
/// size-matched decoder pre-activation.
pub fn translator_forward(
    p: &ModelParams,
    g_x: &DirectedGraph,
    noise: &[f64],
    want_cache: bool,
) -> Result<(DirectedGraph, Option<TranslatorCache>), ModelError> {
    if p.role != Role::Translator {
        return Err(ModelError::InvalidArch(format!("expected translator, got {:?}", p.role)));
    }
    let arch = &p.arch;
    let n = arch.n;
    if g_x.n() != n {
        return Err(ModelError::ShapeMismatch(format!(
            "input graph has {} nodes, model expects {}",
            g_x.n(),
            n
        )));
    }
    if noise.len() != arch.noise_dim * n {
        return Err(ModelError::NoiseLength { got: noise.len(), expected: arch.noise_dim * n });
    }
    let enc_convs = arch.encoder_conv_count();

    let mut cur = FeatureTensor::from_graph(g_x);
    let mut enc_caches = Vec::with_capacity(enc_convs);
    let mut enc_outputs = Vec::with_capacity(enc_convs);
    for li in 0..enc_convs {
        let (out, cache) = e2e_conv_forward_cached(&cur, p.graph_kernels(li))?;
        debug_assert_eq!(out.map_count(), arch.encoder_channels[li + 1]);
        enc_caches.push(cache);
        enc_outputs.push(out.clone());
        cur = out;
    }

    let (node_out, e2n_cache) = e2n_conv_forward_cached(&cur, p.graph_kernels(enc_convs))?;
    debug_assert_eq!(node_out.map_count(), arch.node_channels);
    let mut z_maps = node_out.maps;
    for d in 0..arch.noise_dim {
        z_maps.push(Array1::from(noise[d * n..(d + 1) * n].to_vec()));
    }
    let z = NodeTensor { n, maps: z_maps };

    // decoder layer 0: node-to-edge
    let k_n2e = p.graph_kernels(enc_convs + 1);
    let (out, mut n2e_cache) = n2e_deconv_forward_cached(&z, k_n2e)?;
    let mut cur = match arch.skip_source(0) {
        Some(src) => {
            let pre = add_tensors(&n2e_cache.pre, &enc_outputs[src]);
            let out = apply_edge_activation(&pre, k_n2e.activation);
            n2e_cache.pre = pre;
            out
        }
        None => out,
    };
    debug_assert_eq!(cur.map_count(), arch.decoder_channels[0]);

    let dec_e2e_count = arch.decoder_channels.len() - 1;
    let mut dec_caches = Vec::with_capacity(dec_e2e_count);
    for d in 1..=dec_e2e_count {
        let k = p.graph_kernels(enc_convs + 1 + d);
        let (out, mut cache) = e2e_deconv_forward_cached(&cur, k)?;
        cur = match arch.skip_source(d) {
            Some(src) => {
                let pre = add_tensors(&cache.pre, &enc_outputs[src]);
                let out = apply_edge_activation(&pre, k.activation);
                cache.pre = pre;
                out
            }
            None => out,
        };
        debug_assert_eq!(cur.map_count(), arch.decoder_channels[d]);
        dec_caches.push(cache);
    }

    let weights = cur.maps.pop().expect("decoder output map");
    let graph = DirectedGraph::from_weights(weights)
        .expect("output activation keeps weights nonnegative");
    let cache = want_cache.then_some(TranslatorCache {
        enc: enc_caches,
        e2n: e2n_cache,
        dec_n2e: n2e_cache,
        dec_e2e: dec_caches,
    });
    Ok((graph, cache))
}

/// Exact gradients of a scalar loss for every translator parameter, given
/// the loss gradient with respect to the output weight matrix.
///
/// Skip additions route gradient into both branches; the noise input is
/// not a parameter and its gradient is dropped.
pub fn translator_backward(
    p: &ModelParams,
    cache: &TranslatorCache,
    grad_output: &Array2<f64>,
) -> Result<ModelGrads, ModelError> {
    if p.role != Role::Translator {
        return Err(ModelError::InvalidArch(format!("expected translator, got {:?}", p.role)));
    }
    let arch = &p.arch;
    if grad_output.dim() != (arch.n, arch.n) {
        return Err(ModelError::ShapeMismatch(format!(
            "output gradient must be {0}x{0}",
            arch.n
        )));
    }
    let enc_convs = arch.encoder_conv_count();
    let mut layer_grads: Vec<Option<LayerGrads>> = vec![None; p.layers.len()];
    let mut skip_grads: Vec<Option<FeatureTensor>> = vec![None; enc_convs];

    let mut grad = FeatureTensor { n: arch.n, maps: vec![grad_output.clone()] };
    let dec_e2e_count = arch.decoder_channels.len() - 1;
    for d in (1..=dec_e2e_count).rev() {
        let li = enc_convs + 1 + d;
        let k = p.graph_kernels(li);
        let c = &cache.dec_e2e[d - 1];
        if let Some(src) = arch.skip_source(d) {
            skip_grads[src] = Some(grad_wrt_pre(&c.pre, &grad, k.activation));
        }
        let (gin, kg) = e2e_deconv_backward(k, c, &grad)?;
        layer_grads[li] = Some(LayerGrads::Kernels(kg));
        grad = gin;
    }

    let k_n2e = p.graph_kernels(enc_convs + 1);
    if let Some(src) = arch.skip_source(0) {
        skip_grads[src] = Some(grad_wrt_pre(&cache.dec_n2e.pre, &grad, k_n2e.activation));
    }
    let (grad_z, kg) = n2e_deconv_backward(k_n2e, &cache.dec_n2e, &grad)?;
    layer_grads[enc_convs + 1] = Some(LayerGrads::Kernels(kg));

    let node_grad =
        NodeTensor { n: arch.n, maps: grad_z.maps[..arch.node_channels].to_vec() };
    let (mut upstream, kg) = e2n_conv_backward(p.graph_kernels(enc_convs), &cache.e2n, &node_grad)?;
    layer_grads[enc_convs] = Some(LayerGrads::Kernels(kg));

    for e in (0..enc_convs).rev() {
        if let Some(sg) = &skip_grads[e] {
            upstream = add_tensors(&upstream, sg);
        }
        let (gin, kg) = e2e_conv_backward(p.graph_kernels(e), &cache.enc[e], &upstream)?;
        layer_grads[e] = Some(LayerGrads::Kernels(kg));
        upstream = gin;
    }

    Ok(ModelGrads { layers: layer_grads.into_iter().map(|g| g.unwrap()).collect() })
}

/// Forward cache of one discriminator evaluation.
#[derive(Debug, Clone)]
pub struct DiscriminatorCache {
    y_stack: Vec<EdgeToEdgeCache>,
    x_stack: Vec<EdgeToEdgeCache>,
    e2n: EdgeToNodeCache,
    pool: NodeToGraphCache,
    dense: Vec<DenseCache>,
}

impl DiscriminatorCache {
    /// Evaluated tensor shapes of one channel stack, input first.
    pub fn channel_shape_trace(&self) -> Vec<(usize, usize, usize)> {
        let n = self.e2n.input.n;
        let mut trace = vec![(n, n, self.y_stack.first().map_or(1, |c| c.input.map_count()))];
        for c in &self.y_stack {
            trace.push((n, n, c.pre.map_count()));
        }
        trace
    }

    /// Evaluated shapes after the channels merge: edge-to-node output and
    /// the pooled graph embedding.
    pub fn merged_shape_trace(&self) -> Vec<(usize, usize, usize)> {
        let n = self.e2n.input.n;
        vec![(n, 1, self.e2n.pre.map_count()), (1, 1, self.pool.pre.len())]
    }
}

fn run_edge_stack(
    p: &ModelParams,
    first_layer: usize,
    count: usize,
    input: FeatureTensor,
) -> Result<(FeatureTensor, Vec<EdgeToEdgeCache>), ModelError> {
    let mut cur = input;
    let mut caches = Vec::with_capacity(count);
    for l in 0..count {
        let (out, cache) = e2e_conv_forward_cached(&cur, p.graph_kernels(first_layer + l))?;
        caches.push(cache);
        cur = out;
    }
    Ok((cur, caches))
}

fn backward_edge_stack(
    p: &ModelParams,
    first_layer: usize,
    caches: &[EdgeToEdgeCache],
    mut grad: FeatureTensor,
    layer_grads: &mut [Option<LayerGrads>],
) -> Result<FeatureTensor, ModelError> {
    for l in (0..caches.len()).rev() {
        let (gin, kg) = e2e_conv_backward(p.graph_kernels(first_layer + l), &caches[l], &grad)?;
        layer_grads[first_layer + l] = Some(LayerGrads::Kernels(kg));
        grad = gin;
    }
    Ok(grad)
}

/// Scores a (target, input) pair: probability that the target is the real
/// translation of the input.
pub fn discriminator_forward(
    p: &ModelParams,
    g_y: &DirectedGraph,
    g_x: &DirectedGraph,
    want_cache: bool,
) -> Result<(f64, Option<DiscriminatorCache>), ModelError> {
    if p.role != Role::Discriminator {
        return Err(ModelError::InvalidArch(format!("expected discriminator, got {:?}", p.role)));
    }
    let arch = &p.arch;
    if g_y.n() != arch.n || g_x.n() != arch.n {
        return Err(ModelError::ShapeMismatch(format!(
            "graphs have {} and {} nodes, model expects {}",
            g_y.n(),
            g_x.n(),
            arch.n
        )));
    }
    let stack = arch.disc_edge_channels.len() - 1;
    let (y_out, y_caches) = run_edge_stack(p, 0, stack, FeatureTensor::from_graph(g_y))?;
    let (x_out, x_caches) = run_edge_stack(p, stack, stack, FeatureTensor::from_graph(g_x))?;
    let mut merged_maps = y_out.maps;
    merged_maps.extend(x_out.maps);
    let merged = FeatureTensor { n: arch.n, maps: merged_maps };

    let (node, e2n_cache) = e2n_conv_forward_cached(&merged, p.graph_kernels(2 * stack))?;
    let (emb, pool_cache) = node_to_graph_forward_cached(&node, p.graph_kernels(2 * stack + 1))?;
    let (h, d1) = dense_forward_cached(&emb, p.dense_params(2 * stack + 2))?;
    let (out, d2) = dense_forward_cached(&h, p.dense_params(2 * stack + 3))?;
    let prob = out[0];
    let cache = want_cache.then_some(DiscriminatorCache {
        y_stack: y_caches,
        x_stack: x_caches,
        e2n: e2n_cache,
        pool: pool_cache,
        dense: vec![d1, d2],
    });
    Ok((prob, cache))
}

/// Gradients of a scalar loss for every discriminator parameter, plus the
/// loss gradient with respect to both input adjacency matrices.
pub fn discriminator_backward(
    p: &ModelParams,
    cache: &DiscriminatorCache,
    grad_prob: f64,
) -> Result<(ModelGrads, Array2<f64>, Array2<f64>), ModelError> {
    discriminator_backward_impl(p, cache, grad_prob, false)
}

/// Like [`discriminator_backward`], but the gradient is taken with respect
/// to the final pre-sigmoid logit. GAN losses have exact derivatives at
/// the logit (-log sigmoid(z) gives -(1 - p)), which stay informative even
/// when the output probability saturates.
pub fn discriminator_backward_logit(
    p: &ModelParams,
    cache: &DiscriminatorCache,
    grad_logit: f64,
) -> Result<(ModelGrads, Array2<f64>, Array2<f64>), ModelError> {
    discriminator_backward_impl(p, cache, grad_logit, true)
}

fn discriminator_backward_impl(
    p: &ModelParams,
    cache: &DiscriminatorCache,
    grad_last: f64,
    from_logit: bool,
) -> Result<(ModelGrads, Array2<f64>, Array2<f64>), ModelError> {
    let arch = &p.arch;
    let stack = arch.disc_edge_channels.len() - 1;
    let mut layer_grads: Vec<Option<LayerGrads>> = vec![None; p.layers.len()];

    let g = Array1::from(vec![grad_last]);
    let (gh, dg) = if from_logit {
        dense_backward_from_pre(p.dense_params(2 * stack + 3), &cache.dense[1], &g)?
    } else {
        dense_backward(p.dense_params(2 * stack + 3), &cache.dense[1], &g)?
    };
    layer_grads[2 * stack + 3] = Some(LayerGrads::Dense(dg));
    let (gemb, dg) = dense_backward(p.dense_params(2 * stack + 2), &cache.dense[0], &gh)?;
    layer_grads[2 * stack + 2] = Some(LayerGrads::Dense(dg));
    let (gnode, kg) = node_to_graph_backward(p.graph_kernels(2 * stack + 1), &cache.pool, &gemb)?;
    layer_grads[2 * stack + 1] = Some(LayerGrads::Kernels(kg));
    let (gmerged, kg) = e2n_conv_backward(p.graph_kernels(2 * stack), &cache.e2n, &gnode)?;
    layer_grads[2 * stack] = Some(LayerGrads::Kernels(kg));

    let half = *arch.disc_edge_channels.last().unwrap();
    let gy = FeatureTensor { n: arch.n, maps: gmerged.maps[..half].to_vec() };
    let gx = FeatureTensor { n: arch.n, maps: gmerged.maps[half..].to_vec() };
    let gy_in = backward_edge_stack(p, 0, &cache.y_stack, gy, &mut layer_grads)?;
    let gx_in = backward_edge_stack(p, stack, &cache.x_stack, gx, &mut layer_grads)?;

    let grads = ModelGrads { layers: layer_grads.into_iter().map(|g| g.unwrap()).collect() };
    let mut gy_in = gy_in;
    let mut gx_in = gx_in;
    Ok((grads, gy_in.maps.pop().unwrap(), gx_in.maps.pop().unwrap()))
}

/// Forward cache of one classifier evaluation.
#[derive(Debug, Clone)]
pub struct ClassifierCache {
    stack: Vec<EdgeToEdgeCache>,
    e2n: EdgeToNodeCache,
    pool: NodeToGraphCache,
    dense: Vec<DenseCache>,
}

/// Scores a single graph with the single-channel classifier backbone.
pub fn classifier_forward(
    p: &ModelParams,
    g: &DirectedGraph,
    want_cache: bool,
) -> Result<(f64, Option<ClassifierCache>), ModelError> {
    if p.role != Role::Classifier {
        return Err(ModelError::InvalidArch(format!("expected classifier, got {:?}", p.role)));
    }
    let arch = &p.arch;
    if g.n() != arch.n {
        return Err(ModelError::ShapeMismatch(format!(
            "graph has {} nodes, model expects {}",
            g.n(),
            arch.n
        )));
    }
    let stack = arch.disc_edge_channels.len() - 1;
    let (out, caches) = run_edge_stack(p, 0, stack, FeatureTensor::from_graph(g))?;
    let (node, e2n_cache) = e2n_conv_forward_cached(&out, p.graph_kernels(stack))?;
    let (emb, pool_cache) = node_to_graph_forward_cached(&node, p.graph_kernels(stack + 1))?;
    let (h, d1) = dense_forward_cached(&emb, p.dense_params(stack + 2))?;
    let (score, d2) = dense_forward_cached(&h, p.dense_params(stack + 3))?;
    let prob = score[0];
    let cache = want_cache.then_some(ClassifierCache {
        stack: caches,
        e2n: e2n_cache,
        pool: pool_cache,
        dense: vec![d1, d2],
    });
    Ok((prob, cache))
}

/// Gradients of a scalar loss for every classifier parameter.
pub fn classifier_backward(
    p: &ModelParams,
    cache: &ClassifierCache,
    grad_prob: f64,
) -> Result<ModelGrads, ModelError> {
    classifier_backward_impl(p, cache, grad_prob, false)
}

/// Like [`classifier_backward`] with the gradient at the pre-sigmoid
/// logit; cross-entropy reduces to the exact, stable (p - label) there.
pub fn classifier_backward_logit(
    p: &ModelParams,
    cache: &ClassifierCache,
    grad_logit: f64,
) -> Result<ModelGrads, ModelError> {
    classifier_backward_impl(p, cache, grad_logit, true)
}

fn classifier_backward_impl(
    p: &ModelParams,
    cache: &ClassifierCache,
    grad_last: f64,
    from_logit: bool,
) -> Result<ModelGrads, ModelError> {
    let arch = &p.arch;
    let stack = arch.disc_edge_channels.len() - 1;
    let mut layer_grads: Vec<Option<LayerGrads>> = vec![None; p.layers.len()];

    let g = Array1::from(vec![grad_last]);
    let (gh, dg) = if from_logit {
        dense_backward_from_pre(p.dense_params(stack + 3), &cache.dense[1], &g)?
    } else {
        dense_backward(p.dense_params(stack + 3), &cache.dense[1], &g)?
    };
    layer_grads[stack + 3] = Some(LayerGrads::Dense(dg));
    let (gemb, dg) = dense_backward(p.dense_params(stack + 2), &cache.dense[0], &gh)?;
    layer_grads[stack + 2] = Some(LayerGrads::Dense(dg));
    let (gnode, kg) = node_to_graph_backward(p.graph_kernels(stack + 1), &cache.pool, &gemb)?;
    layer_grads[stack + 1] = Some(LayerGrads::Kernels(kg));
    let (gstack, kg) = e2n_conv_backward(p.graph_kernels(stack), &cache.e2n, &gnode)?;
    layer_grads[stack] = Some(LayerGrads::Kernels(kg));
    backward_edge_stack(p, 0, &cache.stack, gstack, &mut layer_grads)?;

    Ok(ModelGrads { layers: layer_grads.into_iter().map(|g| g.unwrap()).collect() })
}

/// Version tag of the checkpoint JSON format.
pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

/// Serializable snapshot of one network: architecture plus the flat
/// parameter vector in [`ModelParams::flatten`] order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub role: Role,
    pub arch: ArchSpec,
    pub rng_seed: u64,
    pub parameters: Vec<f64>,
}

impl ModelParams {
    pub fn to_checkpoint(&self, rng_seed: u64) -> Checkpoint {
        Checkpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            role: self.role,
            arch: self.arch.clone(),
            rng_seed,
            parameters: self.flatten(),
        }
    }

    pub fn from_checkpoint(c: &Checkpoint) -> Result<ModelParams, ModelError> {
        if c.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(ModelError::Checkpoint(format!(
                "unsupported format version {}, expected {}",
                c.format_version, CHECKPOINT_FORMAT_VERSION
            )));
        }
        let expected = param_count(&c.arch, c.role);
        if c.parameters.len() != expected {
            return Err(ModelError::Checkpoint(format!(
                "checkpoint holds {} parameters, architecture needs {}",
                c.parameters.len(),
                expected
            )));
        }
        ModelParams::from_flat(&c.arch, c.role, &c.parameters)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::DirectedGraph;

    #[test]
    fn init_is_deterministic_with_zero_biases() {
        let arch = ArchSpec::new(12);
        let a = init_params(&arch, Role::Translator, 5).unwrap();
        let b = init_params(&arch, Role::Translator, 5).unwrap();
        assert_eq!(a.flatten(), b.flatten());
        let c = init_params(&arch, Role::Translator, 6).unwrap();
        assert_ne!(a.flatten(), c.flatten());
        for layer in &a.layers {
            match layer {
                Layer::Graph { kernels, .. } | Layer::Pool { kernels } => {
                    assert!(kernels.bias.iter().all(|&b| b == 0.0));
                }
                Layer::Dense(p) => assert!(p.bias.iter().all(|&b| b == 0.0)),
            }
        }
    }

    #[test]
    fn translator_param_count_matches_hand_total() {
        let arch = ArchSpec::new(50).with_noise_dim(0);
        assert_eq!(param_count(&arch, Role::Translator), 31041);
        // first encoder layer alone: 5 kernels pairs of length 50 plus biases
        let p = init_params(&arch, Role::Translator, 1).unwrap();
        match &p.layers[0] {
            Layer::Graph { kernels, .. } => {
                assert_eq!(kernels.phi.len() + kernels.psi.len() + kernels.bias.len(), 505);
            }
            _ => panic!("expected graph layer"),
        }
    }

    #[test]
    fn param_count_scales_linearly_in_n() {
        let at = |n: usize| {
            let arch = ArchSpec::new(n).with_noise_dim(0);
            param_count(&arch, Role::Translator)
        };
        // kernel entries double with n; one bias per output map stays fixed
        let biases = 5 + 10 + 10 + 10 + 5 + 1;
        assert_eq!(at(100) - biases, 2 * (at(50) - biases));
    }

    #[test]
    fn noise_dim_changes_only_first_decoder_layer() {
        let arch0 = ArchSpec::new(20).with_noise_dim(0);
        let arch4 = ArchSpec::new(20).with_noise_dim(4);
        let diff = param_count(&arch4, Role::Translator) - param_count(&arch0, Role::Translator);
        // 4 extra input maps into the node-to-edge layer: 4 * 10 * 2n
        assert_eq!(diff, 4 * 10 * 2 * 20);
    }

    #[test]
    fn param_count_equals_flatten_length() {
        for role in [Role::Translator, Role::Discriminator, Role::Classifier] {
            let arch = ArchSpec::new(9);
            let p = init_params(&arch, role, 3).unwrap();
            assert_eq!(p.flatten().len(), param_count(&arch, role));
        }
    }

    #[test]
    fn translator_output_shape_and_determinism() {
        let arch = ArchSpec::new(8).with_output_activation(Activation::Sigmoid);
        let p = init_params(&arch, Role::Translator, 7).unwrap();
        let g = DirectedGraph::new(8, &[(0, 1, 1.0), (1, 2, 1.0), (3, 4, 1.0)]).unwrap();
        let noise: Vec<f64> = (0..16).map(|i| (i as f64) / 16.0 - 0.5).collect();
        let (out1, _) = translator_forward(&p, &g, &noise, false).unwrap();
        let (out2, _) = translator_forward(&p, &g, &noise, false).unwrap();
        assert_eq!(out1.n(), 8);
        assert_eq!(out1.weights(), out2.weights());
        assert!(out1.weights().iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn translator_relu_output_nonnegative() {
        let arch = ArchSpec::new(6).with_noise_dim(1);
        let p = init_params(&arch, Role::Translator, 99).unwrap();
        let g = DirectedGraph::new(6, &[(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        let noise = vec![0.3; 6];
        let (out, _) = translator_forward(&p, &g, &noise, false).unwrap();
        assert!(out.weights().iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn translator_rejects_bad_noise_length() {
        let arch = ArchSpec::new(6);
        let p = init_params(&arch, Role::Translator, 1).unwrap();
        let g = DirectedGraph::empty(6);
        assert!(matches!(
            translator_forward(&p, &g, &[0.0; 5], false),
            Err(ModelError::NoiseLength { .. })
        ));
    }

    #[test]
    fn discriminator_output_in_unit_interval_and_sensitive() {
        let arch = ArchSpec::new(7);
        let p = init_params(&arch, Role::Discriminator, 11).unwrap();
        let a = DirectedGraph::new(7, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]).unwrap();
        let b = DirectedGraph::new(7, &[(4, 5, 1.0), (5, 6, 1.0)]).unwrap();
        let x = DirectedGraph::new(7, &[(0, 6, 1.0)]).unwrap();
        let (pa, _) = discriminator_forward(&p, &a, &x, false).unwrap();
        let (pb, _) = discriminator_forward(&p, &b, &x, false).unwrap();
        assert!(pa > 0.0 && pa < 1.0);
        assert!(pb > 0.0 && pb < 1.0);
        assert_ne!(pa, pb);
    }

    #[test]
    fn discriminator_all_zero_params_score_half() {
        let arch = ArchSpec::new(5);
        let mut p = init_params(&arch, Role::Discriminator, 1).unwrap();
        let zeros = vec![0.0; param_count(&arch, Role::Discriminator)];
        p.set_from_flat(&zeros).unwrap();
        let g = DirectedGraph::empty(5);
        let (prob, _) = discriminator_forward(&p, &g, &g, false).unwrap();
        assert_eq!(prob, 0.5);
    }

    #[test]
    fn skip_mode_changes_output_and_encoder_gradients() {
        let n = 6;
        let g = DirectedGraph::new(n, &[(0, 1, 1.0), (1, 2, 1.0), (4, 5, 1.0)]).unwrap();
        let noise = vec![0.2; n];
        let arch_add = ArchSpec::new(n)
            .with_noise_dim(1)
            .with_output_activation(Activation::Sigmoid);
        let arch_none = arch_add.clone().with_skip_mode(SkipMode::None);
        let p_add = init_params(&arch_add, Role::Translator, 21).unwrap();
        let mut p_none = init_params(&arch_none, Role::Translator, 21).unwrap();
        p_none.set_from_flat(&p_add.flatten()).unwrap();

        let (out_add, cache_add) = translator_forward(&p_add, &g, &noise, true).unwrap();
        let (out_none, cache_none) = translator_forward(&p_none, &g, &noise, true).unwrap();
        assert_ne!(out_add.weights(), out_none.weights());

        let grad = Array2::from_elem((n, n), 1.0);
        let ga = translator_backward(&p_add, &cache_add.unwrap(), &grad).unwrap().flatten();
        let gn = translator_backward(&p_none, &cache_none.unwrap(), &grad).unwrap().flatten();
        assert_ne!(ga, gn);
    }

    #[test]
    fn checkpoint_round_trips_exactly() {
        let arch = ArchSpec::new(10);
        for role in [Role::Translator, Role::Discriminator, Role::Classifier] {
            let p = init_params(&arch, role, 13).unwrap();
            let json = serde_json::to_string(&p.to_checkpoint(13)).unwrap();
            let back: Checkpoint = serde_json::from_str(&json).unwrap();
            let restored = ModelParams::from_checkpoint(&back).unwrap();
            assert_eq!(p.flatten(), restored.flatten());
            assert_eq!(back.rng_seed, 13);
        }
    }

    #[test]
    fn checkpoint_rejects_wrong_length_or_version() {
        let arch = ArchSpec::new(5);
        let p = init_params(&arch, Role::Translator, 1).unwrap();
        let mut c = p.to_checkpoint(1);
        c.parameters.pop();
        assert!(ModelParams::from_checkpoint(&c).is_err());
        let mut c = p.to_checkpoint(1);
        c.format_version = 99;
        assert!(ModelParams::from_checkpoint(&c).is_err());
    }

    #[test]
    fn invalid_arch_is_rejected() {
        let mut arch = ArchSpec::new(6);
        arch.output_activation = Activation::Linear;
        assert!(init_params(&arch, Role::Translator, 0).is_err());
        let mut arch = ArchSpec::new(6);
        arch.decoder_channels = vec![10, 4, 1];
        assert!(arch.validate().is_err(), "skip add needs mirrored channels");
        arch.skip_mode = SkipMode::None;
        assert!(arch.validate().is_ok());
    }
}
