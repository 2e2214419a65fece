//! `gdmap`: reproducible data generation, model fitting, extension,
//! prediction, and comparison runs over snapshot datasets.
//!
//! Every command resolves its settings from command-line flags, then an
//! optional `--config` key=value file, then built-in defaults, and records
//! the expanded result alongside its outputs. Model files and CSV reports
//! embed the hash of that resolved configuration.
//!
//! Exit codes: 0 success, 2 invalid argument or data, 3 file or format
//! error, 4 numerical failure, 5 out-of-support or ill-posed query.

mod cmd_compare;
mod cmd_extend;
mod cmd_fit;
mod cmd_generate;
mod cmd_predict;
mod config;
mod parse;
mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use gappy_dmap::Error;

#[derive(Parser)]
#[command(
    name = "gdmap",
    about = "Diffusion-map and gappy-POD estimation on snapshot datasets",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic snapshot dataset.
    Generate(GenerateArgs),
    /// Fit models and persist them.
    Fit(FitArgs),
    /// Map new points through a saved model (latent coordinates or
    /// harmonics outputs).
    Extend(ExtendArgs),
    /// Run a prediction route of a saved pipeline over a dataset.
    Predict(PredictArgs),
    /// Compare gappy reconstruction methods or sweep masks and ranks.
    Compare(CompareArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Dataset kind: slow-manifold | surrogate.
    kind: String,
    /// Key=value config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (must exist).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Timescale separation of the slow-manifold system.
    #[arg(long)]
    eps: Option<f64>,
    /// Number of samples (slow-manifold).
    #[arg(long)]
    n: Option<usize>,
    /// Surrogate parameter grid: AxBxC counts, or 720 for the default.
    #[arg(long)]
    grid: Option<String>,
    /// Surrogate ambient dimension.
    #[arg(long)]
    dim: Option<usize>,
    /// RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Snapshot file format: binary | csv.
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct FitArgs {
    /// What to fit: pipeline | dmap | gh | pod.
    #[arg(long)]
    what: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training snapshots (matrix file, one observation per row).
    #[arg(long)]
    snapshots: Option<PathBuf>,
    /// Parameter table aligned with the snapshots.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Output directory (must exist).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Ambient kernel bandwidth: median pairwise distance times this.
    #[arg(long)]
    bandwidth_multiplier: Option<f64>,
    /// Divide out the sampling density before the Markov normalization.
    #[arg(long)]
    density_normalize: Option<bool>,
    /// Retained eigenpairs.
    #[arg(long)]
    n_pairs: Option<usize>,
    /// Coordinates scanned by the residual analysis.
    #[arg(long)]
    k_max: Option<usize>,
    /// Coordinate selection: gap | top:M | threshold:X.
    #[arg(long)]
    selection: Option<String>,
    /// Local-regression bandwidth factor for the residual analysis.
    #[arg(long)]
    regression_factor: Option<f64>,
    /// Harmonics truncation parameter.
    #[arg(long)]
    delta: Option<f64>,
    /// Latent-space bandwidth multiplier.
    #[arg(long)]
    latent_multiplier: Option<f64>,
    /// Parameter-space bandwidth multiplier.
    #[arg(long)]
    params_multiplier: Option<f64>,
    /// Observed-subspace bandwidth multiplier.
    #[arg(long)]
    partial_multiplier: Option<f64>,
    /// Partial-observation mask as one-based indices, e.g. 1,4,7.
    #[arg(long)]
    partial_mask: Option<String>,
    /// Size of the automatically chosen partial mask.
    #[arg(long)]
    partial_mask_size: Option<usize>,
    /// Hold out this fraction of rows before fitting.
    #[arg(long)]
    holdout_fraction: Option<f64>,
    /// Seed for the holdout split.
    #[arg(long)]
    seed: Option<u64>,
    /// POD truncation by retained mode count.
    #[arg(long)]
    pod_rank: Option<usize>,
    /// POD truncation by captured energy percentage.
    #[arg(long)]
    pod_energy: Option<f64>,
    /// POD truncation by reconstruction error percentage.
    #[arg(long)]
    pod_error: Option<f64>,
    /// Subtract the mean snapshot before the POD.
    #[arg(long)]
    center: Option<bool>,
    /// Scale each state entry to unit variance before the POD.
    #[arg(long)]
    standardize: Option<bool>,
    /// Measure POD energy in squared singular values.
    #[arg(long)]
    squared_energy: Option<bool>,
    /// Harmonics fit: input matrix file (gh mode).
    #[arg(long)]
    gh_inputs: Option<PathBuf>,
    /// Harmonics fit: target matrix file (gh mode).
    #[arg(long)]
    gh_targets: Option<PathBuf>,
    /// Harmonics fit: explicit kernel bandwidth (gh mode).
    #[arg(long)]
    gh_bandwidth: Option<f64>,
    /// Harmonics fit: median-distance bandwidth multiplier (gh mode).
    #[arg(long)]
    gh_bandwidth_multiplier: Option<f64>,
}

#[derive(Args)]
struct ExtendArgs {
    /// Saved model container: diffusion map, harmonics model, or pipeline.
    #[arg(long)]
    model: Option<PathBuf>,
    /// New points, one per row.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    /// Saved pipeline bundle.
    #[arg(long)]
    pipeline: Option<PathBuf>,
    /// Route: params-to-obs | obs-to-params | partial-to-params |
    /// partial-to-partial.
    #[arg(long)]
    route: Option<String>,
    /// Query rows: parameters, snapshots, or masked values per the route.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Ground truth aligned with the input, for the error summary.
    #[arg(long)]
    actual: Option<PathBuf>,
    /// Training snapshots the pipeline claims descent from; hashes must
    /// match or the run is refused.
    #[arg(long)]
    training: Option<PathBuf>,
    /// Target entries for partial-to-partial: one-based indices or `all`.
    #[arg(long)]
    target_mask: Option<String>,
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Mode: equal | mask-sweep | rank-sweep.
    mode: Option<String>,
    /// Saved pipeline bundle (equal mode).
    #[arg(long)]
    pipeline: Option<PathBuf>,
    /// Saved POD basis (equal and mask-sweep modes).
    #[arg(long)]
    pod: Option<PathBuf>,
    /// Test snapshots, one per row; rank-sweep fits its bases on these.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Mask size for the sweep.
    #[arg(long)]
    mask_size: Option<usize>,
    /// Number of seeded masks to sweep.
    #[arg(long)]
    n_masks: Option<usize>,
    /// Base seed for the sweep masks.
    #[arg(long)]
    seed: Option<u64>,
    /// Largest rank of the rank sweep.
    #[arg(long)]
    max_rank: Option<usize>,
    /// Reconstruction mask for the rank sweep, one-based.
    #[arg(long)]
    mask: Option<String>,
    /// Held-out rows reconstructed during the rank sweep.
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    center: Option<bool>,
    #[arg(long)]
    standardize: Option<bool>,
    #[arg(long)]
    squared_energy: Option<bool>,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) | Error::InvalidData(_) => 2,
        Error::Io { .. } | Error::Format { .. } => 3,
        Error::Numeric(_) | Error::DegenerateData(_) => 4,
        Error::OutOfSupport(_) | Error::IllPosedExtension { .. } | Error::IllPosed(_) => 5,
    }
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => cmd_generate::run(args),
        Command::Fit(args) => cmd_fit::run(args),
        Command::Extend(args) => cmd_extend::run(args),
        Command::Predict(args) => cmd_predict::run(args),
        Command::Compare(args) => cmd_compare::run(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}
