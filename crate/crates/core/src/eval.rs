//! Direct and indirect evaluation of a trained translator.
//!
//! Direct evaluation compares generated targets against real targets with
//! degree-distribution distances, property MSEs, and (for datasets that
//! record it) the edge-increasing ratio. Indirect evaluation trains two
//! transfer classifiers, one on generated targets and one on real targets,
//! and scores both on the same held-out real pairs.

use crate::error::{EvalError, TrainError};
use crate::graph::{self, DirectedGraph};
use crate::metrics::{
    degree_distance_report, estimate_k, property_mse_report, DistanceReport, PropertyMseReport,
    BINARIZE_THRESHOLD,
};
use crate::model::{
    classifier_backward_logit, classifier_forward, init_params, translator_forward, ModelParams,
    Role,
};
use crate::synth::{derive_seed, Dataset, DatasetKind, GraphPair};
use crate::train::{adam_step, clamp_prob, sample_noise, AdamState};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

/// Which targets a transfer classifier was trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierVariant {
    GeneratedTrained,
    RealTrained,
}

/// Classification quality of one transfer classifier on held-out pairs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifierReport {
    pub variant: ClassifierVariant,
    pub precision: f64,
    pub recall: f64,
    pub auc: f64,
    pub f1: f64,
}

/// Threshold metrics plus AUC for a scored binary problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassificationMetrics {
    pub precision: f64,
    pub recall: f64,
    pub auc: f64,
    pub f1: f64,
}

/// Hyperparameters of transfer-classifier training.
#[derive(Debug, Clone)]
pub struct ClassifierTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for ClassifierTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 8,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

/// Runs the translator over each input with per-item noise derived from
/// `seed`; deterministic in (parameters, inputs, seed).
pub fn generate_targets(
    translator: &ModelParams,
    inputs: &[DirectedGraph],
    seed: u64,
) -> Result<Vec<DirectedGraph>, EvalError> {
    let noise_len = translator.arch.noise_dim * translator.arch.n;
    inputs
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, i as u64));
            let noise = sample_noise(&mut rng, noise_len);
            let (out, _) = translator_forward(translator, g, &noise, false)?;
            Ok(out)
        })
        .collect()
}

/// Trains the single-channel graph classifier (discriminator backbone
/// without the conditioning channel) with cross-entropy and ADAM.
pub fn binary_classifier_train(
    positives: &[DirectedGraph],
    negatives: &[DirectedGraph],
    arch: &crate::model::ArchSpec,
    cfg: &ClassifierTrainConfig,
) -> Result<ModelParams, EvalError> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(EvalError::BadScoreInput);
    }
    let mut params = init_params(arch, Role::Classifier, cfg.seed)?;
    let mut flat = params.flatten();
    let mut adam = AdamState::new(flat.len());
    let mut shuffle_rng = ChaCha12Rng::seed_from_u64(derive_seed(cfg.seed, 1));

    let samples: Vec<(&DirectedGraph, bool)> = positives
        .iter()
        .map(|g| (g, true))
        .chain(negatives.iter().map(|g| (g, false)))
        .collect();
    let mut order: Vec<usize> = (0..samples.len()).collect();

    let mut step = 0usize;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let b = chunk.len() as f64;
            let mut grads = vec![0.0; flat.len()];
            let mut loss = 0.0;
            for &idx in chunk {
                let (g, label) = samples[idx];
                let (p, cache) = classifier_forward(&params, g, true)?;
                let pc = clamp_prob(p);
                loss += if label { -pc.ln() } else { -(1.0 - pc).ln() };
                // exact cross-entropy derivative at the logit
                let grad_z = (p - if label { 1.0 } else { 0.0 }) / b;
                let cg = classifier_backward_logit(&params, &cache.unwrap(), grad_z)?;
                for (a, g) in grads.iter_mut().zip(cg.flatten()) {
                    *a += g;
                }
            }
            if !loss.is_finite() {
                return Err(EvalError::Train(TrainError::NonFiniteLoss { step }));
            }
            adam_step(&mut flat, &grads, &mut adam, cfg.lr, cfg.beta1, cfg.beta2, cfg.epsilon)
                .map_err(EvalError::Train)?;
            params.set_from_flat(&flat)?;
            step += 1;
        }
    }
    Ok(params)
}

/// Precision, recall, and F1 at the threshold (score >= threshold is
/// positive) plus the Mann-Whitney AUC with ties counted one half.
pub fn classification_metrics(
    scores: &[f64],
    labels: &[bool],
    threshold: f64,
) -> Result<ClassificationMetrics, EvalError> {
    if scores.is_empty() || scores.len() != labels.len() {
        return Err(EvalError::BadScoreInput);
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(EvalError::SingleClassLabels);
    }

    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&s, &l) in scores.iter().zip(labels) {
        let predicted = s >= threshold;
        match (predicted, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let precision = if tp + fp > 0 { tp as f64 / (tp + fp) as f64 } else { 0.0 };
    let recall = tp as f64 / (tp + fn_) as f64;
    let f1 =
        if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };

    let mut wins = 0.0;
    for (&sp, &lp) in scores.iter().zip(labels) {
        if !lp {
            continue;
        }
        for (&sn, &ln) in scores.iter().zip(labels) {
            if ln {
                continue;
            }
            if sp > sn {
                wins += 1.0;
            } else if sp == sn {
                wins += 0.5;
            }
        }
    }
    let auc = wins / (positives * negatives) as f64;
    Ok(ClassificationMetrics { precision, recall, auc, f1 })
}

/// Edge-increasing-ratio statistics over generated targets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KStats {
    pub mean: f64,
    pub values: Vec<f64>,
}

/// Everything direct evaluation produces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectReport {
    pub distances: DistanceReport,
    pub property_mse: PropertyMseReport,
    /// Present when the dataset records an edge-increasing ratio.
    pub k_stats: Option<KStats>,
}

/// Compares an explicit generated collection against the real targets of
/// the given pairs; the seam shared by [`direct_eval`] and oracle tests.
pub fn direct_report_from(
    generated: &[DirectedGraph],
    pairs: &[&GraphPair],
) -> Result<DirectReport, EvalError> {
    let targets: Vec<DirectedGraph> = pairs.iter().map(|p| p.target.clone()).collect();
    let distances = degree_distance_report(generated, &targets)?;
    let property_mse = property_mse_report(generated, &targets)?;
    let k_stats = if pairs.iter().any(|p| p.meta_k().is_some()) {
        let values: Vec<f64> = pairs
            .iter()
            .zip(generated)
            .filter_map(|(p, g)| estimate_k(&p.input, g).ok())
            .collect();
        (!values.is_empty()).then(|| KStats {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            values,
        })
    } else {
        None
    };
    Ok(DirectReport { distances, property_mse, k_stats })
}

/// Generates targets for every test input and reports the direct metrics.
pub fn direct_eval(
    translator: &ModelParams,
    test_set: &Dataset,
    seed: u64,
) -> Result<DirectReport, EvalError> {
    let pairs: Vec<&GraphPair> = test_set.test_pairs().collect();
    if pairs.is_empty() {
        return Err(EvalError::TooFewTestPairs { got: 0, min: 1 });
    }
    let inputs: Vec<DirectedGraph> = pairs.iter().map(|p| p.input.clone()).collect();
    let generated = generate_targets(translator, &inputs, derive_seed(seed, 7))?;
    direct_report_from(&generated, &pairs)
}

/// Indirect evaluation with a pluggable target generator; the seam that
/// lets tests run copy- and oracle-translators through the same flow.
pub fn indirect_eval_with(
    generate: &mut dyn FnMut(&[DirectedGraph]) -> Result<Vec<DirectedGraph>, EvalError>,
    test_set: &Dataset,
    arch: &crate::model::ArchSpec,
    cfg: &ClassifierTrainConfig,
    seed: u64,
) -> Result<(ClassifierReport, ClassifierReport), EvalError> {
    let pairs: Vec<&GraphPair> = test_set.test_pairs().collect();
    if pairs.len() < 2 {
        return Err(EvalError::TooFewTestPairs { got: pairs.len(), min: 2 });
    }
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, 11));
    order.shuffle(&mut rng);
    let half = pairs.len() / 2;
    let (part1, part2) = order.split_at(half);

    let binarize_generated = test_set.kind() != DatasetKind::Auth;
    let inputs1: Vec<DirectedGraph> = part1.iter().map(|&i| pairs[i].input.clone()).collect();
    let targets1: Vec<DirectedGraph> = part1.iter().map(|&i| pairs[i].target.clone()).collect();
    let mut generated = generate(&inputs1)?;
    if binarize_generated {
        generated = generated
            .iter()
            .map(|g| graph::binarize(g, BINARIZE_THRESHOLD).expect("nonnegative threshold"))
            .collect();
    }

    let clf_a = binary_classifier_train(&generated, &inputs1, arch, cfg)?;
    let clf_b = binary_classifier_train(&targets1, &inputs1, arch, cfg)?;

    let mut scores_a = Vec::new();
    let mut scores_b = Vec::new();
    let mut labels = Vec::new();
    for &i in part2 {
        for (g, label) in [(&pairs[i].target, true), (&pairs[i].input, false)] {
            let (pa, _) = classifier_forward(&clf_a, g, false)?;
            let (pb, _) = classifier_forward(&clf_b, g, false)?;
            scores_a.push(pa);
            scores_b.push(pb);
            labels.push(label);
        }
    }
    let ma = classification_metrics(&scores_a, &labels, 0.5)?;
    let mb = classification_metrics(&scores_b, &labels, 0.5)?;
    Ok((
        ClassifierReport {
            variant: ClassifierVariant::GeneratedTrained,
            precision: ma.precision,
            recall: ma.recall,
            auc: ma.auc,
            f1: ma.f1,
        },
        ClassifierReport {
            variant: ClassifierVariant::RealTrained,
            precision: mb.precision,
            recall: mb.recall,
            auc: mb.auc,
            f1: mb.f1,
        },
    ))
}

/// Splits the test pairs in half, trains a classifier on generated targets
/// and another on real targets, and scores both on the second half.
pub fn indirect_eval(
    translator: &ModelParams,
    test_set: &Dataset,
    cfg: &ClassifierTrainConfig,
    seed: u64,
) -> Result<(ClassifierReport, ClassifierReport), EvalError> {
    let gen_seed = derive_seed(seed, 13);
    indirect_eval_with(
        &mut |inputs| generate_targets(translator, inputs, gen_seed),
        test_set,
        &translator.arch,
        cfg,
        seed,
    )
}
