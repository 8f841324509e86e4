use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "svdres",
    version,
    about = "Singular-value view of image degradations: analysis, operators and a toy restoration network"
)]
pub struct Cli {
    /// Log progress to stderr (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Apply a seeded synthetic degradation to every PNG in a directory.
    Degrade(DegradeArgs),
    /// Swap singular vectors/values between clean and degraded images and write stats.json.
    Analyze(AnalyzeArgs),
    /// Label one clean/degraded pair as vector- or value-dominated.
    Classify(ClassifyArgs),
    /// Relative reconstruction error as SVD or Fourier components are added.
    Progressive(ProgressiveArgs),
    /// Time per-channel SVD against 2D FFT decompose + compose.
    Bench(BenchArgs),
    /// Finite-difference gradient checks of the network operators and losses.
    Gradcheck(GradcheckArgs),
    /// Train the toy restoration network.
    Train(TrainArgs),
    /// Score a checkpoint on clean/degraded image pairs.
    Eval(EvalArgs),
    /// Train one run per toggle set and compare.
    Ablate(AblateArgs),
}

#[derive(Debug, Args)]
pub struct DegradeArgs {
    /// Directory of clean PNGs (or a single PNG).
    #[arg(
        long = "in",
        value_name = "PATH",
        required_unless_present = "synth",
        conflicts_with = "synth"
    )]
    pub input: Option<PathBuf>,
    /// Generate this many procedural clean images instead of reading --in.
    #[arg(long, value_name = "N")]
    pub synth: Option<usize>,
    /// Side of generated images.
    #[arg(long, default_value_t = 96, requires = "synth")]
    pub size: usize,
    /// Output directory; files keep their input names.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Also write the clean images here.
    #[arg(long, value_name = "DIR")]
    pub clean_out: Option<PathBuf>,
    /// Rain, GaussianNoise (noise), Blur, Haze or LowLight.
    #[arg(long)]
    pub kind: String,
    /// Parameters as JSON, e.g. '{"sigma": 25}'. Defaults per kind when omitted.
    #[arg(long, value_name = "JSON")]
    pub params: Option<String>,
    /// Base seed; file i in name order uses seed + i.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Directory of clean PNGs.
    #[arg(long, value_name = "DIR")]
    pub clean: PathBuf,
    /// Degraded PNGs matched to --clean by file name. Subdirectories are
    /// read as separate tasks named after the subdirectory.
    #[arg(long, value_name = "DIR")]
    pub degraded: PathBuf,
    /// Task name when --degraded has no subdirectories [default: directory name].
    #[arg(long)]
    pub task: Option<String>,
    /// Output JSON; per-task and per-image CSVs are written beside it.
    #[arg(long, value_name = "FILE", default_value = "stats.json")]
    pub out: PathBuf,
    /// Also write a log-scale boxplot of singular values as SVG.
    #[arg(long)]
    pub svg: bool,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long, value_name = "FILE")]
    pub clean: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub degraded: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProgressiveArgs {
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long, value_name = "FILE", default_value = "curve.csv")]
    pub out: PathBuf,
    /// svd (rank-1 terms by σ) or fft (frequencies by radius).
    #[arg(long, default_value = "svd")]
    pub order: String,
    /// Channel to decompose.
    #[arg(long, default_value_t = 0)]
    pub channel: usize,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 64)]
    pub c: usize,
    #[arg(long, default_value_t = 128)]
    pub h: usize,
    #[arg(long, default_value_t = 128)]
    pub w: usize,
    /// Repetitions (at least 3); medians are reported.
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_name = "FILE", default_value = "bench.json")]
    pub out: PathBuf,
    /// Also write the timings as CSV.
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// all, or a comma list of conv, sveo, svao, loss_dec, loss_orth.
    #[arg(long, default_value = "all")]
    pub component: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// TrainConfig JSON; every key optional [default: built-in defaults].
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Checkpoint path.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Trajectory CSV [default: <out>.log.csv].
    #[arg(long, value_name = "FILE")]
    pub log: Option<PathBuf>,
    /// Override the config's step count.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Override the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the config's toggles (none, all, or e.g. sveo+l_orth).
    #[arg(long)]
    pub toggles: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_name = "FILE")]
    pub ckpt: PathBuf,
    /// Directory of clean PNGs.
    #[arg(long, value_name = "DIR")]
    pub clean: PathBuf,
    /// Degraded PNGs matched by name; subdirectories are separate tasks.
    #[arg(long, value_name = "DIR")]
    pub degraded: PathBuf,
    /// Task name when --degraded has no subdirectories [default: directory name].
    #[arg(long)]
    pub task: Option<String>,
    #[arg(long, value_name = "FILE", default_value = "metrics.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// TrainConfig JSON [default: built-in defaults].
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Comma-separated toggle sets; each is none, all, or a +-joined subset
    /// of sveo, svao, l_orth, l_dec.
    #[arg(long, default_value = "none,sveo,sveo+svao,all")]
    pub toggles: String,
    /// Override the config's step count.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, value_name = "FILE", default_value = "ablation.csv")]
    pub out: PathBuf,
    /// Instead of training, minimize only the orthogonality loss of the SVEO
    /// weights from a perturbed orthogonal start and write JSON to --out.
    #[arg(long)]
    pub orth_drive: bool,
    /// Steps of the orthogonality drive.
    #[arg(long, default_value_t = 1000)]
    pub orth_steps: usize,
    /// Std of the Gaussian perturbation for the orthogonality drive.
    #[arg(long, default_value_t = 0.05)]
    pub perturbation: f64,
}
