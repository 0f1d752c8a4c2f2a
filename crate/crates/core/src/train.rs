//! Adversarial training: alternating ADAM updates of the conditional
//! discriminator and the translator.
//!
//! Each generator step sees `d_steps_per_g_step` discriminator updates on
//! (real target | input) vs (translated | input) pairs, then one translator
//! update through the frozen discriminator. All randomness flows from the
//! config seed, so runs are bit-reproducible.

use crate::error::TrainError;
use crate::graph::DirectedGraph;
use crate::model::{
    discriminator_backward_logit, discriminator_forward, init_params, translator_backward,
    translator_forward, ArchSpec, ModelParams, Role,
};
use crate::synth::{Dataset, GraphPair};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

/// Probabilities are clamped to [CLAMP, 1-CLAMP] before any logarithm.
pub const PROB_CLAMP: f64 = 1e-7;

pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Generator objective variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorLoss {
    /// -log D(fake): the standard remedy for vanishing early gradients.
    NonSaturating,
    /// +log(1 - D(fake)): the literal minimax objective.
    Minimax,
}

/// Hyperparameters of one training run.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    /// When set, stop after this many generator steps regardless of epochs.
    pub max_steps: Option<usize>,
    pub batch_size: usize,
    pub lr_g: f64,
    pub lr_d: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub d_steps_per_g_step: usize,
    pub seed: u64,
    /// Node maps of noise appended at the bottleneck; overrides the arch.
    pub noise_dim: usize,
    pub generator_loss: GeneratorLoss,
    /// Emit a checkpoint every this many generator steps.
    pub checkpoint_every: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            max_steps: None,
            batch_size: 8,
            lr_g: 1e-3,
            lr_d: 1e-3,
            beta1: 0.5,
            beta2: 0.999,
            epsilon: 1e-8,
            d_steps_per_g_step: 1,
            seed: 0,
            noise_dim: 2,
            generator_loss: GeneratorLoss::NonSaturating,
            checkpoint_every: None,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), TrainError> {
        if self.lr_g < 0.0 || self.lr_d < 0.0 {
            return Err(TrainError::BadConfig("learning rates must be nonnegative".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(TrainError::BadConfig("beta1 and beta2 must lie in [0, 1)".into()));
        }
        if self.batch_size == 0 {
            return Err(TrainError::BadConfig("batch_size must be at least 1".into()));
        }
        if self.d_steps_per_g_step == 0 {
            return Err(TrainError::BadConfig("d_steps_per_g_step must be at least 1".into()));
        }
        Ok(())
    }
}

/// First/second moment accumulators of one parameter vector.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self { m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }
}

/// One bias-corrected ADAM update, in place.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
) -> Result<(), TrainError> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(TrainError::BadConfig(format!(
            "adam shapes disagree: {} params, {} grads, {} moments",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(TrainError::NonFiniteLoss { step: state.t as usize });
    }
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
    }
    Ok(())
}

/// Discriminator and generator losses for one batch of probabilities.
///
/// `loss_d = -mean log d_real - mean log(1 - d_fake)`;
/// `loss_g = -mean log d_fake` (non-saturating form).
pub fn gan_losses(d_real: &[f64], d_fake: &[f64]) -> Result<(f64, f64), TrainError> {
    if d_real.is_empty() || d_fake.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let mean_log_real =
        d_real.iter().map(|&p| clamp_prob(p).ln()).sum::<f64>() / d_real.len() as f64;
    let mean_log_one_minus_fake =
        d_fake.iter().map(|&p| (1.0 - clamp_prob(p)).ln()).sum::<f64>() / d_fake.len() as f64;
    let mean_log_fake =
        d_fake.iter().map(|&p| clamp_prob(p).ln()).sum::<f64>() / d_fake.len() as f64;
    Ok((-mean_log_real - mean_log_one_minus_fake, -mean_log_fake))
}

/// Generator loss value under the configured objective.
pub fn generator_loss_value(d_fake: &[f64], mode: GeneratorLoss) -> f64 {
    match mode {
        GeneratorLoss::NonSaturating => {
            -d_fake.iter().map(|&p| clamp_prob(p).ln()).sum::<f64>() / d_fake.len() as f64
        }
        GeneratorLoss::Minimax => {
            d_fake.iter().map(|&p| (1.0 - clamp_prob(p)).ln()).sum::<f64>() / d_fake.len() as f64
        }
    }
}

/// Per-step training telemetry.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub loss_d: f64,
    pub loss_g: f64,
    pub d_real_mean: f64,
    pub d_fake_mean: f64,
}

/// Loss and discriminator-output history over a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<StepRecord>,
}

/// Draws one noise vector for a translator input.
pub fn sample_noise(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Trains translator and discriminator on the dataset's train split.
pub fn train(
    dataset: &Dataset,
    arch: &ArchSpec,
    cfg: &TrainConfig,
) -> Result<(ModelParams, ModelParams, TrainHistory), TrainError> {
    train_with_sink(dataset, arch, cfg, &mut |_, _, _| {})
}

/// Like [`train`], invoking `sink(step, translator, discriminator)` at the
/// configured checkpoint cadence.
pub fn train_with_sink(
    dataset: &Dataset,
    arch: &ArchSpec,
    cfg: &TrainConfig,
    sink: &mut dyn FnMut(usize, &ModelParams, &ModelParams),
) -> Result<(ModelParams, ModelParams, TrainHistory), TrainError> {
    cfg.validate()?;
    let arch = arch.clone().with_noise_dim(cfg.noise_dim);
    arch.validate()?;
    let train_pairs: Vec<&GraphPair> = dataset.train_pairs().collect();
    if train_pairs.is_empty() {
        return Err(TrainError::EmptyTrainSplit);
    }
    if train_pairs.iter().any(|p| p.input.n() != arch.n) {
        return Err(TrainError::Model(crate::error::ModelError::ShapeMismatch(format!(
            "dataset node count {} does not match arch n {}",
            train_pairs[0].input.n(),
            arch.n
        ))));
    }

    let mut seeder = ChaCha12Rng::seed_from_u64(cfg.seed);
    let t_seed = seeder.random::<u64>();
    let d_seed = seeder.random::<u64>();
    let mut shuffle_rng = ChaCha12Rng::seed_from_u64(seeder.random::<u64>());
    let mut noise_rng = ChaCha12Rng::seed_from_u64(seeder.random::<u64>());

    let mut t_params = init_params(&arch, Role::Translator, t_seed)?;
    let mut d_params = init_params(&arch, Role::Discriminator, d_seed)?;
    let mut t_flat = t_params.flatten();
    let mut d_flat = d_params.flatten();
    let mut t_adam = AdamState::new(t_flat.len());
    let mut d_adam = AdamState::new(d_flat.len());

    let noise_len = arch.noise_dim * arch.n;
    let mut history = TrainHistory::default();
    let mut step = 0usize;
    let mut indices: Vec<usize> = (0..train_pairs.len()).collect();

    let target_steps = cfg.max_steps;
    let mut epoch = 0usize;
    'outer: loop {
        match target_steps {
            Some(s) => {
                if step >= s {
                    break;
                }
            }
            None => {
                if epoch >= cfg.epochs {
                    break;
                }
            }
        }
        indices.shuffle(&mut shuffle_rng);
        for chunk in indices.chunks(cfg.batch_size) {
            if let Some(s) = target_steps {
                if step >= s {
                    break 'outer;
                }
            }
            let batch: Vec<&GraphPair> = chunk.iter().map(|&i| train_pairs[i]).collect();

            let mut last_d = (0.0, 0.0, 0.0);
            for _ in 0..cfg.d_steps_per_g_step {
                last_d = discriminator_update(
                    &batch,
                    &t_params,
                    &mut d_params,
                    &mut d_flat,
                    &mut d_adam,
                    cfg,
                    noise_len,
                    &mut noise_rng,
                    step,
                )?;
            }
            let (loss_g, d_fake_mean) = generator_update(
                &batch,
                &mut t_params,
                &mut t_flat,
                &mut t_adam,
                &d_params,
                cfg,
                noise_len,
                &mut noise_rng,
                step,
            )?;

            let (loss_d, d_real_mean, _) = last_d;
            if !loss_d.is_finite() || !loss_g.is_finite() {
                return Err(TrainError::NonFiniteLoss { step });
            }
            step += 1;
            history.records.push(StepRecord { step, loss_d, loss_g, d_real_mean, d_fake_mean });
            if let Some(every) = cfg.checkpoint_every {
                if every > 0 && step % every == 0 {
                    sink(step, &t_params, &d_params);
                }
            }
        }
        epoch += 1;
    }

    Ok((t_params, d_params, history))
}

#[allow(clippy::too_many_arguments)]
fn discriminator_update(
    batch: &[&GraphPair],
    t_params: &ModelParams,
    d_params: &mut ModelParams,
    d_flat: &mut [f64],
    d_adam: &mut AdamState,
    cfg: &TrainConfig,
    noise_len: usize,
    noise_rng: &mut ChaCha12Rng,
    step: usize,
) -> Result<(f64, f64, f64), TrainError> {
    let b = batch.len() as f64;
    let mut grads = vec![0.0; d_flat.len()];
    let mut p_reals = Vec::with_capacity(batch.len());
    let mut p_fakes = Vec::with_capacity(batch.len());
    for pair in batch {
        let noise = sample_noise(noise_rng, noise_len);
        let (fake, _) = translator_forward(t_params, &pair.input, &noise, false)?;

        // exact logit-space derivatives of -log p and -log(1 - p); these
        // stay bounded and informative even when the sigmoid saturates
        let (p_real, cache) = discriminator_forward(d_params, &pair.target, &pair.input, true)?;
        let grad_real = -(1.0 - p_real) / b;
        let (dg, _, _) = discriminator_backward_logit(d_params, &cache.unwrap(), grad_real)?;
        accumulate(&mut grads, &dg.flatten());
        p_reals.push(p_real);

        let (p_fake, cache) = discriminator_forward(d_params, &fake, &pair.input, true)?;
        let grad_fake = p_fake / b;
        let (dg, _, _) = discriminator_backward_logit(d_params, &cache.unwrap(), grad_fake)?;
        accumulate(&mut grads, &dg.flatten());
        p_fakes.push(p_fake);
    }
    adam_step(d_flat, &grads, d_adam, cfg.lr_d, cfg.beta1, cfg.beta2, cfg.epsilon)
        .map_err(|_| TrainError::NonFiniteLoss { step })?;
    d_params.set_from_flat(d_flat)?;
    let (loss_d, _) = gan_losses(&p_reals, &p_fakes)?;
    let d_real_mean = p_reals.iter().sum::<f64>() / b;
    let d_fake_mean = p_fakes.iter().sum::<f64>() / b;
    Ok((loss_d, d_real_mean, d_fake_mean))
}

#[allow(clippy::too_many_arguments)]
fn generator_update(
    batch: &[&GraphPair],
    t_params: &mut ModelParams,
    t_flat: &mut [f64],
    t_adam: &mut AdamState,
    d_params: &ModelParams,
    cfg: &TrainConfig,
    noise_len: usize,
    noise_rng: &mut ChaCha12Rng,
    step: usize,
) -> Result<(f64, f64), TrainError> {
    let b = batch.len() as f64;
    let mut grads = vec![0.0; t_flat.len()];
    let mut p_fakes = Vec::with_capacity(batch.len());
    for pair in batch {
        let noise = sample_noise(noise_rng, noise_len);
        let (fake, t_cache) = translator_forward(t_params, &pair.input, &noise, true)?;
        let (p_fake, d_cache) = discriminator_forward(d_params, &fake, &pair.input, true)?;
        // logit-space derivatives: -(1 - p) for -log p, -p for +log(1 - p)
        let grad_z = match cfg.generator_loss {
            GeneratorLoss::NonSaturating => -(1.0 - p_fake) / b,
            GeneratorLoss::Minimax => -p_fake / b,
        };
        let (_, grad_y, _) = discriminator_backward_logit(d_params, &d_cache.unwrap(), grad_z)?;
        let tg = translator_backward(t_params, &t_cache.unwrap(), &grad_y)?;
        accumulate(&mut grads, &tg.flatten());
        p_fakes.push(p_fake);
    }
    adam_step(t_flat, &grads, t_adam, cfg.lr_g, cfg.beta1, cfg.beta2, cfg.epsilon)
        .map_err(|_| TrainError::NonFiniteLoss { step })?;
    t_params.set_from_flat(t_flat)?;
    let loss_g = generator_loss_value(&p_fakes, cfg.generator_loss);
    let d_fake_mean = p_fakes.iter().sum::<f64>() / b;
    Ok((loss_g, d_fake_mean))
}

fn accumulate(acc: &mut [f64], inc: &[f64]) {
    debug_assert_eq!(acc.len(), inc.len());
    for (a, g) in acc.iter_mut().zip(inc) {
        *a += g;
    }
}

/// Edge-level F1 between binarized generated and real target graphs,
/// pooled over all pairs; the overfit-training quality measure.
pub fn edge_f1(generated: &[DirectedGraph], targets: &[DirectedGraph]) -> f64 {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (g, t) in generated.iter().zip(targets) {
        for i in 0..g.n() {
            for j in 0..g.n() {
                let gen = g.weight(i, j) > 0.5;
                let real = t.weight(i, j) > 0.5;
                match (gen, real) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_ += 1,
                    (false, false) => {}
                }
            }
        }
    }
    if 2 * tp + fp + fn_ == 0 {
        return 0.0;
    }
    2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
}
