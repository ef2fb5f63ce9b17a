use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug, Clone)]
#[command(
    name = "imagan",
    version,
    about = "Skeleton-motion augmentation: classical transforms, a cycle-consistent GAN, recognizers and metrics"
)]
pub struct Cli {
    /// Worker threads (default: one per core).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// TOML file with one table of settings per command.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run manifest path (default: beside the main output).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// More log output; repeat for debug.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Load a raw dataset, smooth and pad it, and export the clean data.
    Prepare(PrepareArgs),
    /// Expand a dataset with scale, shift, time interpolation and joint noise.
    AugmentClassical(AugmentArgs),
    /// Train the GAN on a prepared dataset.
    TrainGan(TrainGanArgs),
    /// Sample synthetic sequences from a trained GAN.
    Generate(GenerateArgs),
    /// Train an LSTM or CNN recognizer.
    TrainRecognizer(TrainRecognizerArgs),
    /// Overall and per-class accuracy and loss of a recognizer.
    Evaluate(EvaluateArgs),
    /// Affinity, diversity and seed statistics of a set of runs.
    Metrics(MetricsArgs),
    /// Grid search over the classical policy's σ values.
    GridSearch(GridSearchArgs),
    /// PCA then t-SNE of recognizer latents.
    Visualize(VisualizeArgs),
    /// Run a multi-stage experiment.
    RunRecipe(RecipeArgs),
    /// Re-run the command recorded in a manifest and compare checksums.
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Prepare(_) => "prepare",
            Command::AugmentClassical(_) => "augment-classical",
            Command::TrainGan(_) => "train-gan",
            Command::Generate(_) => "generate",
            Command::TrainRecognizer(_) => "train-recognizer",
            Command::Evaluate(_) => "evaluate",
            Command::Metrics(_) => "metrics",
            Command::GridSearch(_) => "grid-search",
            Command::Visualize(_) => "visualize",
            Command::RunRecipe(_) => "run-recipe",
            Command::Replay(_) => "replay",
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetKind {
    Shrec17,
    Msr3d,
    /// Synthetic 3-class trajectories.
    Toy,
    /// Already prepared; rejected by `prepare`.
    Normalized,
}

impl DatasetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetKind::Shrec17 => "shrec17",
            DatasetKind::Msr3d => "msr3d",
            DatasetKind::Toy => "toy",
            DatasetKind::Normalized => "normalized",
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct PrepareArgs {
    #[arg(long, value_enum)]
    pub dataset: DatasetKind,
    /// Dataset root (default: $IMAGAN_DATA_DIR/<dataset>).
    #[arg(long)]
    pub root: Option<PathBuf>,
    /// SHREC'17 label set: 14 or 28.
    #[arg(long)]
    pub labels: Option<usize>,
    /// Toy samples per class.
    #[arg(long)]
    pub per_class: Option<usize>,
    /// Toy frames per sample.
    #[arg(long)]
    pub frames: Option<usize>,
    /// Toy class count.
    #[arg(long)]
    pub classes: Option<usize>,
    /// Toy jitter std.
    #[arg(long)]
    pub toy_noise: Option<f64>,
    /// Toy generator seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Savitzky–Golay window.
    #[arg(long)]
    pub window: Option<usize>,
    /// Savitzky–Golay polynomial order.
    #[arg(long)]
    pub order: Option<usize>,
    /// `predefined`, `odd-subjects`, `subjects:1,3,5` or `ratio:0.7`.
    #[arg(long)]
    pub split: Option<String>,
    /// Seed of a `ratio` split.
    #[arg(long)]
    pub split_seed: Option<u64>,
    #[arg(long)]
    pub train_out: Option<PathBuf>,
    #[arg(long)]
    pub val_out: Option<PathBuf>,
    /// Clean data of the whole dataset.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct AugmentArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub sigma_scale: Option<f64>,
    #[arg(long)]
    pub sigma_shift: Option<f64>,
    #[arg(long)]
    pub sigma_noise: Option<f64>,
    /// Noised-joint count range `MIN:MAX` (default by skeleton: 1:8 hand, 1:4 body).
    #[arg(long)]
    pub joints: Option<String>,
    /// Augmented copies per sample.
    #[arg(long)]
    pub multiplier: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `random` positions or `knots` (identity re-sampling).
    #[arg(long)]
    pub interpolation: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct TrainGanArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lambda1: Option<f64>,
    #[arg(long)]
    pub lambda2: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub beta1: Option<f64>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    /// Epochs per convergence window.
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Std of the noise injected into generator inputs.
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Classes left out of GAN training, e.g. `1,4`.
    #[arg(long)]
    pub exclude_classes: Option<String>,
    /// Per-epoch losses (default: `<out>.history.tsv`).
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct GenerateArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Source sequences.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub per_sample: Option<usize>,
    /// Sampling noise std (default: the value the GAN trained with).
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Only generate from sources of these classes, e.g. `0,2`.
    #[arg(long)]
    pub classes: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct TrainRecognizerArgs {
    /// `lstm` or `cnn`.
    #[arg(long)]
    pub kind: Option<String>,
    /// Training data; repeat to train on the union.
    #[arg(long = "train", required = true)]
    pub train: Vec<PathBuf>,
    #[arg(long)]
    pub val: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// LSTM units.
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Attention width.
    #[arg(long)]
    pub attention: Option<usize>,
    /// CNN channels `C1:C2`.
    #[arg(long)]
    pub channels: Option<String>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub plateau_patience: Option<usize>,
    #[arg(long)]
    pub early_stop_patience: Option<usize>,
    #[arg(long)]
    pub lr_factor: Option<f64>,
    #[arg(long)]
    pub plateau_threshold: Option<f64>,
    /// Per-epoch statistics (default: `<out>.history.tsv`).
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct MetricsArgs {
    /// `CLEAN_CKPT:AUG_CKPT` for one seed; repeat per seed. The first
    /// recognizer trained on clean data, the second on the augmented set.
    #[arg(long = "run", required = true)]
    pub runs: Vec<String>,
    /// Clean validation data.
    #[arg(long)]
    pub val: PathBuf,
    /// Augmented validation data for affinity.
    #[arg(long)]
    pub aug_val: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct GridSearchArgs {
    /// Grid file of `key = v1, v2` lines (default: the coarse grid).
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Clean training data, or the whole dataset when `--val` is absent.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub val: Option<PathBuf>,
    /// Split applied to `--dataset` when `--val` is absent.
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long)]
    pub split_seed: Option<u64>,
    /// Overrides the grid file's recognizer kind.
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub joints: Option<String>,
    #[arg(long)]
    pub multiplier: Option<usize>,
    /// Train on clean ∪ augmented rather than the augmented copies alone.
    #[arg(long)]
    pub include_clean: Option<bool>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub attention: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct VisualizeArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// CSV of `x,y,label` rows.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub pca_keep: Option<usize>,
    #[arg(long)]
    pub perplexity: Option<f64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub exaggeration: Option<f64>,
    #[arg(long)]
    pub exaggeration_iters: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecipeName {
    /// CD vs CAD vs GAD per recognizer over four seeds.
    Table1,
    /// Withhold classes from GAN training and score them per class.
    Generalization,
    /// Sweep the GAN's hidden units.
    Ablation,
    /// Affinity/diversity/accuracy points of a σ grid plus CD and GAD.
    AffinityScatter,
}

impl RecipeName {
    pub fn as_str(self) -> &'static str {
        match self {
            RecipeName::Table1 => "table1",
            RecipeName::Generalization => "generalization",
            RecipeName::Ablation => "ablation",
            RecipeName::AffinityScatter => "affinity-scatter",
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct RecipeArgs {
    #[arg(value_enum)]
    pub recipe: RecipeName,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// `toy` (desk scale, the default), `shrec17` or `msr3d`.
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long)]
    pub root: Option<PathBuf>,
    #[arg(long)]
    pub split: Option<String>,
    /// Recognizer seeds, e.g. `0,1,2,3`.
    #[arg(long)]
    pub seeds: Option<String>,
    /// Recognizer kinds, e.g. `lstm,cnn`.
    #[arg(long)]
    pub kinds: Option<String>,
    /// Grid file for the classical policy search.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Synthetic copies per source sample.
    #[arg(long)]
    pub per_sample: Option<usize>,
    #[arg(long)]
    pub include_clean: Option<bool>,
    /// Toy samples per class.
    #[arg(long)]
    pub per_class: Option<usize>,
    /// Toy frames.
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long)]
    pub data_seed: Option<u64>,
    #[arg(long)]
    pub rec_hidden: Option<usize>,
    #[arg(long)]
    pub rec_attention: Option<usize>,
    #[arg(long)]
    pub rec_lr: Option<f64>,
    #[arg(long)]
    pub rec_batch: Option<usize>,
    #[arg(long)]
    pub rec_max_epochs: Option<usize>,
    #[arg(long)]
    pub gan_hidden: Option<usize>,
    #[arg(long)]
    pub gan_batch: Option<usize>,
    #[arg(long)]
    pub gan_lr: Option<f64>,
    #[arg(long)]
    pub gan_max_epochs: Option<usize>,
    #[arg(long)]
    pub gan_seed: Option<u64>,
    /// Classes withheld from GAN training (generalization).
    #[arg(long)]
    pub withhold: Option<usize>,
    /// GAN hidden units to sweep (ablation), e.g. `64,128,256,512`.
    #[arg(long)]
    pub hidden_units: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct ReplayArgs {
    pub manifest_path: PathBuf,
}
