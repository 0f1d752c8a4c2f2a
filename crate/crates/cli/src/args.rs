//! Command-line definitions and validation.

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::ffi::OsString;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "gtgan",
    version,
    about = "Graph-to-graph translation: synthetic datasets, adversarial training, and evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic paired dataset (JSONL).
    GenData(GenDataArgs),
    /// Ingest an authentication CSV log into a paired dataset.
    IngestAuth(IngestAuthArgs),
    /// Train translator and discriminator on a dataset.
    Train(TrainArgs),
    /// Generate target graphs for a dataset with a trained translator.
    Translate(TranslateArgs),
    /// Direct evaluation: distribution distances and property MSEs.
    EvalDirect(EvalArgs),
    /// Indirect evaluation: classifier transfer on generated targets.
    EvalIndirect(EvalIndirectArgs),
    /// Finite-difference check of every layer's analytic gradients.
    Gradcheck(GradcheckArgs),
    /// Summarize a dataset or checkpoint file.
    Info(InfoArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    ScaleFree,
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SkipArg {
    Add,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputActArg {
    /// Sigmoid for synthetic 0/1 targets, relu for auth frequency graphs.
    Auto,
    Relu,
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Test,
    All,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Dataset family.
    #[arg(long, value_enum)]
    pub kind: KindArg,
    /// Node count of every graph.
    #[arg(long)]
    pub n: usize,
    /// Number of input/target pairs.
    #[arg(long)]
    pub count: usize,
    /// Fraction of pairs assigned to the train split.
    #[arg(long, default_value_t = 0.4)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file, or a directory to receive dataset.jsonl.
    #[arg(long)]
    pub out: PathBuf,
    /// Scale-free existing-node edge-move probability.
    #[arg(long, default_value_t = 0.54)]
    pub beta: f64,
    /// Poisson mean of the edge-increasing ratio.
    #[arg(long, default_value_t = 5.0)]
    pub lambda: f64,
}

#[derive(Debug, Args)]
pub struct IngestAuthArgs {
    /// CSV log: time,user,src_computer,dst_computer,red_team per line.
    #[arg(long)]
    pub input: PathBuf,
    /// Tumbling window length in seconds.
    #[arg(long, default_value_t = 3600)]
    pub window: u64,
    /// Pad every window graph to this node count.
    #[arg(long)]
    pub n: usize,
    /// Fraction of users assigned to the train split.
    #[arg(long, default_value_t = 0.5)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file, or a directory to receive dataset.jsonl.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset JSONL produced by gen-data or ingest-auth.
    #[arg(long)]
    pub data: PathBuf,
    /// Directory for checkpoints and the training history.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Passes over the train split; ignored when --steps is given.
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    /// Stop after exactly this many generator steps.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr_g: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub lr_d: f64,
    #[arg(long, default_value_t = 0.5)]
    pub beta1: f64,
    #[arg(long, default_value_t = 0.999)]
    pub beta2: f64,
    /// Discriminator updates per generator update.
    #[arg(long, default_value_t = 1)]
    pub d_steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Noise node-maps appended at the translator bottleneck.
    #[arg(long, default_value_t = 2)]
    pub noise_dim: usize,
    #[arg(long, value_enum, default_value_t = SkipArg::Add)]
    pub skip_mode: SkipArg,
    #[arg(long, value_enum, default_value_t = OutputActArg::Auto)]
    pub output_activation: OutputActArg,
    /// Width of the discriminator's fully-connected layer.
    #[arg(long, default_value_t = 64)]
    pub fc_width: usize,
    /// Write intermediate checkpoints every this many generator steps.
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    /// Use the literal minimax generator objective.
    #[arg(long, default_value_t = false)]
    pub minimax: bool,
}

#[derive(Debug, Args)]
pub struct TranslateArgs {
    /// Translator checkpoint JSON.
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Output JSONL of (input, generated) pairs.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Which split of the dataset to translate.
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Translator checkpoint JSON.
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Output report JSON.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct EvalIndirectArgs {
    #[command(flatten)]
    pub base: EvalArgs,
    /// Transfer-classifier training epochs.
    #[arg(long, default_value_t = 20)]
    pub classifier_epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub classifier_lr: f64,
    #[arg(long, default_value_t = 8)]
    pub classifier_batch: usize,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Node count of the checked layers.
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    /// Seeded checks per layer kind and activation.
    #[arg(long, default_value_t = 20)]
    pub seeds: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub epsilon: f64,
}

#[derive(Debug, Args)]
pub struct InfoArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

/// Parses an argv vector into a validated command.
pub fn parse_args<I, T>(argv: I) -> Result<Cli, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    Cli::try_parse_from(argv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gen_data_parses() {
        let cli = parse_args([
            "gtgan",
            "gen-data",
            "--kind",
            "poisson",
            "--n",
            "50",
            "--count",
            "100",
            "--seed",
            "7",
            "--out",
            "d/",
        ])
        .unwrap();
        match cli.command {
            Command::GenData(args) => {
                assert_eq!(args.kind, KindArg::Poisson);
                assert_eq!(args.n, 50);
                assert_eq!(args.count, 100);
                assert_eq!(args.seed, 7);
                assert_eq!(args.out, PathBuf::from("d/"));
                assert_eq!(args.train_fraction, 0.4);
            }
            other => panic!("unexpected command {other:?}"),
        }
    }

    #[test]
    fn train_requires_data() {
        let err = parse_args(["gtgan", "train"]).unwrap_err();
        assert_eq!(err.kind(), clap::error::ErrorKind::MissingRequiredArgument);
    }

    #[test]
    fn bogus_kind_lists_valid_values() {
        let err = parse_args([
            "gtgan", "gen-data", "--kind", "bogus", "--n", "5", "--count", "4", "--out", "x",
        ])
        .unwrap_err();
        let text = err.to_string();
        assert!(text.contains("scale-free"), "{text}");
        assert!(text.contains("poisson"), "{text}");
    }

    #[test]
    fn unknown_flag_is_rejected() {
        assert!(parse_args(["gtgan", "gradcheck", "--bogus"]).is_err());
    }
}
