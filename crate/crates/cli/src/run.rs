//! Command implementations. Each command reads its inputs, runs the
//! corresponding core pipeline, writes artifacts atomically, and prints a
//! one-line summary.

use crate::args::{
    Cli, Command, EvalArgs, EvalIndirectArgs, GenDataArgs, GradcheckArgs, InfoArgs,
    IngestAuthArgs, KindArg, OutputActArg, SkipArg, SplitArg, TrainArgs, TranslateArgs,
};
use crate::io;
use anyhow::{bail, Context, Result};
use gtgan_core::auth::{build_user_graphs, parse_auth_log};
use gtgan_core::eval::{
    direct_eval, generate_targets, indirect_eval, ClassifierReport, ClassifierTrainConfig,
    DirectReport,
};
use gtgan_core::graph::DirectedGraph;
use gtgan_core::layers::{grad_check, Activation, LayerKind};
use gtgan_core::model::{param_count, ArchSpec, Role, SkipMode};
use gtgan_core::synth::{
    make_dataset_with, Dataset, DatasetKind, GenOptions, GraphPair, Split,
};
use gtgan_core::train::{train_with_sink, TrainConfig};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;
use serde_json::{Map, Value};
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

/// Executes a parsed command; errors map to a nonzero exit in main.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(args) => gen_data(args),
        Command::IngestAuth(args) => ingest_auth(args),
        Command::Train(args) => train_cmd(args),
        Command::Translate(args) => translate(args),
        Command::EvalDirect(args) => eval_direct_cmd(args),
        Command::EvalIndirect(args) => eval_indirect_cmd(args),
        Command::Gradcheck(args) => gradcheck_cmd(args),
        Command::Info(args) => info_cmd(args),
    }
}

/// `--out dir/` drops the default file name into the directory.
fn resolve_out(path: &Path, default_name: &str) -> PathBuf {
    let is_dir_like = path.as_os_str().to_string_lossy().ends_with('/') || path.is_dir();
    if is_dir_like {
        path.join(default_name)
    } else {
        path.to_path_buf()
    }
}

#[derive(Debug, Serialize)]
struct DatasetSummary {
    path: String,
    kind: DatasetKind,
    n: usize,
    pairs: usize,
    train: usize,
    test: usize,
}

fn summarize(ds: &Dataset, path: &Path) -> Result<DatasetSummary> {
    let n = match ds.n() {
        Some(n) => n,
        None => bail!("dataset {} is empty", path.display()),
    };
    Ok(DatasetSummary {
        path: path.display().to_string(),
        kind: ds.kind(),
        n,
        pairs: ds.len(),
        train: ds.train_pairs().count(),
        test: ds.test_pairs().count(),
    })
}

fn gen_data(args: GenDataArgs) -> Result<()> {
    let kind = match args.kind {
        KindArg::ScaleFree => DatasetKind::ScaleFree,
        KindArg::Poisson => DatasetKind::Poisson,
    };
    let opts = GenOptions { beta: args.beta, lambda: args.lambda };
    let ds = make_dataset_with(kind, args.n, args.count, args.train_fraction, args.seed, &opts)
        .context("generating dataset")?;
    let out = resolve_out(&args.out, "dataset.jsonl");
    io::write_dataset(&ds, &out)?;
    println!(
        "wrote {} {} pairs (n={}, train={}, test={}, seed={}) to {}",
        ds.len(),
        kind.name(),
        args.n,
        ds.train_pairs().count(),
        ds.test_pairs().count(),
        args.seed,
        out.display()
    );
    Ok(())
}

/// Re-embeds a window graph into `n` nodes, keeping indices.
fn pad_graph(g: &DirectedGraph, n: usize) -> Result<DirectedGraph> {
    if g.n() > n {
        bail!("window touches {} computers, more than --n {}", g.n(), n);
    }
    let edges: Vec<(usize, usize, f64)> = g.edges().collect();
    Ok(DirectedGraph::new(n, &edges)?)
}

fn ingest_auth(args: IngestAuthArgs) -> Result<()> {
    let file =
        File::open(&args.input).with_context(|| format!("opening {}", args.input.display()))?;
    let events = parse_auth_log(BufReader::new(file)).context("parsing auth log")?;
    let windows = build_user_graphs(&events, args.window).context("building window graphs")?;

    let mut pairs = Vec::new();
    let mut users = Vec::new();
    for w in &windows {
        let Some(malicious) = &w.malicious else { continue };
        let input = pad_graph(&w.normal, args.n)
            .with_context(|| format!("user {} window {}", w.user, w.window_start))?;
        let target = pad_graph(malicious, args.n)
            .with_context(|| format!("user {} window {}", w.user, w.window_start))?;
        let mut meta = Map::new();
        meta.insert("kind".into(), Value::from(DatasetKind::Auth.name()));
        meta.insert("user".into(), Value::from(w.user.clone()));
        meta.insert("window_start".into(), Value::from(w.window_start));
        meta.insert("window_end".into(), Value::from(w.window_end));
        meta.insert(
            "node_labels".into(),
            Value::from(w.node_labels.iter().map(|s| Value::from(s.clone())).collect::<Vec<_>>()),
        );
        pairs.push(GraphPair::new(input, target, meta).context("assembling pair")?);
        users.push(w.user.clone());
    }
    if pairs.is_empty() {
        bail!("no windows with red-team activity; nothing to pair");
    }

    // split by user so evaluation generalizes across users
    let mut distinct: Vec<String> = users.clone();
    distinct.sort();
    distinct.dedup();
    let mut rng = ChaCha12Rng::seed_from_u64(args.seed);
    distinct.shuffle(&mut rng);
    let train_users = (distinct.len() as f64 * args.train_fraction).floor() as usize;
    let train_set: std::collections::BTreeSet<&str> =
        distinct[..train_users].iter().map(|s| s.as_str()).collect();
    let splits: Vec<Split> = users
        .iter()
        .map(|u| if train_set.contains(u.as_str()) { Split::Train } else { Split::Test })
        .collect();

    let ds = Dataset::new(DatasetKind::Auth, pairs, splits).context("assembling dataset")?;
    let out = resolve_out(&args.out, "dataset.jsonl");
    io::write_dataset(&ds, &out)?;
    println!(
        "ingested {} events into {} malicious-window pairs over {} users (train={}, test={}) to {}",
        events.len(),
        ds.len(),
        distinct.len(),
        ds.train_pairs().count(),
        ds.test_pairs().count(),
        out.display()
    );
    Ok(())
}

fn build_arch(ds: &Dataset, args: &TrainArgs) -> Result<ArchSpec> {
    let n = ds.n().context("dataset is empty")?;
    let output_activation = match args.output_activation {
        OutputActArg::Relu => Activation::Relu,
        OutputActArg::Sigmoid => Activation::Sigmoid,
        OutputActArg::Auto => match ds.kind() {
            DatasetKind::Auth => Activation::Relu,
            _ => Activation::Sigmoid,
        },
    };
    let mut arch = ArchSpec::new(n)
        .with_noise_dim(args.noise_dim)
        .with_output_activation(output_activation);
    arch.skip_mode = match args.skip_mode {
        SkipArg::Add => SkipMode::Add,
        SkipArg::None => SkipMode::None,
    };
    arch.fc_width = args.fc_width;
    Ok(arch)
}

fn train_cmd(args: TrainArgs) -> Result<()> {
    let ds = io::read_dataset(&args.data)?;
    let arch = build_arch(&ds, &args)?;
    let cfg = TrainConfig {
        epochs: args.epochs,
        max_steps: args.steps,
        batch_size: args.batch_size,
        lr_g: args.lr_g,
        lr_d: args.lr_d,
        beta1: args.beta1,
        beta2: args.beta2,
        epsilon: 1e-8,
        d_steps_per_g_step: args.d_steps,
        seed: args.seed,
        noise_dim: args.noise_dim,
        generator_loss: if args.minimax {
            gtgan_core::train::GeneratorLoss::Minimax
        } else {
            gtgan_core::train::GeneratorLoss::NonSaturating
        },
        checkpoint_every: args.checkpoint_every,
    };

    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let mut sink_err: Option<anyhow::Error> = None;
    let out_dir = args.out_dir.clone();
    let seed = args.seed;
    let (translator, discriminator, history) =
        train_with_sink(&ds, &arch, &cfg, &mut |step, t, d| {
            if sink_err.is_some() {
                return;
            }
            let res = io::write_checkpoint(
                t,
                seed,
                &out_dir.join(format!("checkpoint-{step:06}-translator.json")),
            )
            .and_then(|_| {
                io::write_checkpoint(
                    d,
                    seed,
                    &out_dir.join(format!("checkpoint-{step:06}-discriminator.json")),
                )
            });
            if let Err(e) = res {
                sink_err = Some(e);
            }
        })
        .context("training failed")?;
    if let Some(e) = sink_err {
        return Err(e.context("writing periodic checkpoint"));
    }

    io::write_checkpoint(&translator, args.seed, &args.out_dir.join("translator.json"))?;
    io::write_checkpoint(&discriminator, args.seed, &args.out_dir.join("discriminator.json"))?;
    io::write_history(&history, &args.out_dir.join("history.csv"))?;
    let last = history.records.last();
    println!(
        "trained {} generator steps on {} pairs (seed={}); final loss_d={:.4} loss_g={:.4}; artifacts in {}",
        history.records.len(),
        ds.train_pairs().count(),
        args.seed,
        last.map_or(f64::NAN, |r| r.loss_d),
        last.map_or(f64::NAN, |r| r.loss_g),
        args.out_dir.display()
    );
    Ok(())
}

fn load_translator(path: &Path, ds: &Dataset) -> Result<gtgan_core::model::ModelParams> {
    let (params, _) = io::read_checkpoint(path)?;
    if params.role != Role::Translator {
        bail!("checkpoint {} holds a {:?}, expected a translator", path.display(), params.role);
    }
    let n = ds.n().context("dataset is empty")?;
    if params.arch.n != n {
        bail!(
            "checkpoint {} was trained at n={}, dataset has n={}",
            path.display(),
            params.arch.n,
            n
        );
    }
    Ok(params)
}

fn translate(args: TranslateArgs) -> Result<()> {
    let ds = io::read_dataset(&args.data)?;
    let translator = load_translator(&args.checkpoint, &ds)?;

    let selected: Vec<(usize, &GraphPair)> = ds
        .pairs()
        .enumerate()
        .filter(|(i, _)| match args.split {
            SplitArg::Train => ds.split_of(*i) == Split::Train,
            SplitArg::Test => ds.split_of(*i) == Split::Test,
            SplitArg::All => true,
        })
        .collect();
    if selected.is_empty() {
        bail!("no pairs in the requested split");
    }
    let inputs: Vec<DirectedGraph> = selected.iter().map(|(_, p)| p.input.clone()).collect();
    let generated = generate_targets(&translator, &inputs, args.seed)?;

    let mut pairs = Vec::with_capacity(selected.len());
    let mut splits = Vec::with_capacity(selected.len());
    for ((idx, pair), gen) in selected.iter().zip(generated) {
        let mut meta = pair.meta.clone();
        meta.insert("generated".into(), Value::from(true));
        meta.insert("generation_seed".into(), Value::from(args.seed));
        pairs.push(GraphPair::new(pair.input.clone(), gen, meta).context("assembling pair")?);
        splits.push(ds.split_of(*idx));
    }
    let out_ds = Dataset::new(ds.kind(), pairs, splits).context("assembling dataset")?;
    io::write_dataset(&out_ds, &args.out)?;
    println!(
        "translated {} inputs (split={:?}, seed={}) to {}",
        out_ds.len(),
        args.split,
        args.seed,
        args.out.display()
    );
    Ok(())
}

/// The combined evaluation report schema; each command fills its section.
#[derive(Debug, Serialize)]
struct EvalReport {
    command: String,
    seed: u64,
    checkpoint: String,
    dataset: DatasetSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    direct: Option<DirectReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    indirect: Option<IndirectSection>,
}

#[derive(Debug, Serialize)]
struct IndirectSection {
    generated_trained: ClassifierReport,
    real_trained: ClassifierReport,
}

fn eval_direct_cmd(args: EvalArgs) -> Result<()> {
    let ds = io::read_dataset(&args.data)?;
    let translator = load_translator(&args.checkpoint, &ds)?;
    let direct = direct_eval(&translator, &ds, args.seed).context("direct evaluation")?;
    let report = EvalReport {
        command: "eval-direct".into(),
        seed: args.seed,
        checkpoint: args.checkpoint.display().to_string(),
        dataset: summarize(&ds, &args.data)?,
        direct: Some(direct),
        indirect: None,
    };
    io::write_report(&report, &args.out)?;
    let d = report.direct.as_ref().unwrap();
    println!(
        "direct eval (seed={}): degree js={:.4} wasserstein={:.4}{}; report at {}",
        args.seed,
        d.distances.js,
        d.distances.wasserstein,
        d.k_stats
            .as_ref()
            .map_or(String::new(), |k| format!(" mean_k={:.3}", k.mean)),
        args.out.display()
    );
    Ok(())
}

fn eval_indirect_cmd(args: EvalIndirectArgs) -> Result<()> {
    let ds = io::read_dataset(&args.base.data)?;
    let translator = load_translator(&args.base.checkpoint, &ds)?;
    let cfg = ClassifierTrainConfig {
        epochs: args.classifier_epochs,
        batch_size: args.classifier_batch,
        lr: args.classifier_lr,
        seed: args.base.seed,
        ..ClassifierTrainConfig::default()
    };
    let (generated_trained, real_trained) =
        indirect_eval(&translator, &ds, &cfg, args.base.seed).context("indirect evaluation")?;
    let report = EvalReport {
        command: "eval-indirect".into(),
        seed: args.base.seed,
        checkpoint: args.base.checkpoint.display().to_string(),
        dataset: summarize(&ds, &args.base.data)?,
        direct: None,
        indirect: Some(IndirectSection { generated_trained, real_trained }),
    };
    io::write_report(&report, &args.base.out)?;
    let ind = report.indirect.as_ref().unwrap();
    println!(
        "indirect eval (seed={}): generated-trained auc={:.3} f1={:.3}; real-trained auc={:.3} f1={:.3}; report at {}",
        args.base.seed,
        ind.generated_trained.auc,
        ind.generated_trained.f1,
        ind.real_trained.auc,
        ind.real_trained.f1,
        args.base.out.display()
    );
    Ok(())
}

fn gradcheck_cmd(args: GradcheckArgs) -> Result<()> {
    let (m_in, m_out) = (2, 3);
    let mut worst_overall: f64 = 0.0;
    for kind in LayerKind::ALL {
        for activation in [Activation::Linear, Activation::Relu] {
            let mut worst: f64 = 0.0;
            let mut checked = 0usize;
            let mut seed = 0u64;
            while checked < args.seeds {
                let report =
                    grad_check(kind, args.n, m_in, m_out, activation, seed, args.epsilon);
                seed += 1;
                // relu slopes are only measurable away from the kink
                if activation == Activation::Relu
                    && report.min_abs_preactivation <= 10.0 * args.epsilon
                {
                    continue;
                }
                worst = worst.max(report.max_rel_error);
                checked += 1;
            }
            println!(
                "{:<14} {:<7} max rel err {:.3e} over {} seeds",
                kind.name(),
                format!("{activation:?}").to_lowercase(),
                worst,
                checked
            );
            worst_overall = worst_overall.max(worst);
        }
    }
    if worst_overall >= 1e-4 {
        bail!("gradient check failed: max relative error {worst_overall:.3e} >= 1e-4");
    }
    println!("all gradients match finite differences (worst {worst_overall:.3e})");
    Ok(())
}

fn info_cmd(args: InfoArgs) -> Result<()> {
    let mut shown = false;
    if let Some(path) = &args.data {
        let ds = io::read_dataset(path)?;
        let summary = summarize(&ds, path)?;
        let mean_edges = |f: &dyn Fn(&GraphPair) -> usize| {
            ds.pairs().map(f).sum::<usize>() as f64 / ds.len().max(1) as f64
        };
        println!(
            "dataset {}: kind={} n={} pairs={} train={} test={} mean|E(x)|={:.1} mean|E(y)|={:.1}",
            summary.path,
            ds.kind().name(),
            summary.n,
            summary.pairs,
            summary.train,
            summary.test,
            mean_edges(&|p: &GraphPair| p.input.edge_count()),
            mean_edges(&|p: &GraphPair| p.target.edge_count()),
        );
        shown = true;
    }
    if let Some(path) = &args.checkpoint {
        let (params, checkpoint) = io::read_checkpoint(path)?;
        println!(
            "checkpoint {}: role={:?} n={} params={} noise_dim={} skip={:?} output={:?} rng_seed={}",
            path.display(),
            params.role,
            params.arch.n,
            param_count(&params.arch, params.role),
            params.arch.noise_dim,
            params.arch.skip_mode,
            params.arch.output_activation,
            checkpoint.rng_seed,
        );
        shown = true;
    }
    if !shown {
        bail!("pass --data and/or --checkpoint");
    }
    Ok(())
}
