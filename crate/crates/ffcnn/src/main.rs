//! Command-line front end: argument parsing and dispatch only; the actual
//! work lives in `ffcnn::commands`.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ffcnn::commands::{cmd_eval, cmd_fit, cmd_profile, cmd_variants, Variant};
use ffcnn::datasets::Split;
use ffcnn::error::{Error, Result};
use ffcnn::model::{Architecture, DatasetKind, RunConfig};
use ffcnn::numkit::{KMeansInit, RidgeSpec};
use ffcnn::saab::DEFAULT_DELTA_REL;

#[derive(Parser)]
#[command(
    name = "ffcnn",
    version,
    about = "Builds CNN classifiers feedforward: conv kernels from data statistics, \
             FC layers from cascaded least-squares regressors"
)]
struct Cli {
    /// Dataset root holding mnist/ and cifar10/ subdirectories.
    #[arg(long, global = true, env = "FFCNN_DATA_DIR")]
    data_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model on the training split and write a .ffm container.
    Fit(FitArgs),
    /// Evaluate a stored model: accuracy and confusion matrix as JSON.
    Eval(EvalArgs),
    /// Per-dimension cross-entropy profiles of every model space.
    Profile(ProfileArgs),
    /// Build the ff1/ff2/ff3 classifier variants on one shared extractor.
    Variants(VariantsArgs),
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    dataset: DatasetArg,
    /// Convolutional preset; `auto` picks the preset matching the dataset.
    #[arg(long, default_value = "auto")]
    arch: ArchArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// FC stage widths, e.g. 120,84,10. Defaults to the dataset's standard
    /// widths.
    #[arg(long, value_delimiter = ',')]
    fc_widths: Option<Vec<usize>>,
    /// Per-class cluster counts for the first hidden stage (10 values).
    #[arg(long, value_delimiter = ',')]
    clusters: Option<Vec<usize>>,
    #[arg(long, default_value = "kmeanspp")]
    init: InitArg,
    /// Cap on images used for conv-layer statistics; the classifier always
    /// sees the full training set.
    #[arg(long)]
    sample_cap: Option<usize>,
    /// Ridge strength for the least-squares solves: "auto" or a number.
    #[arg(long, default_value = "auto", value_parser = parse_ridge)]
    ridge: RidgeSpec,
    /// Relative margin of the conv bias over the largest training patch norm.
    #[arg(long, default_value_t = DEFAULT_DELTA_REL)]
    delta_rel: f64,
    /// Output model path.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value = "test")]
    split: SplitArg,
    /// Also write the JSON report here.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ProfileArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value = "test")]
    split: SplitArg,
    /// Interval count for every space (default: 32, and 16 for the output
    /// space).
    #[arg(long)]
    intervals: Option<usize>,
    /// Directory for the per-space CSV files and summary.json.
    #[arg(long, default_value = "profile")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct VariantsArgs {
    #[arg(long)]
    dataset: DatasetArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    sample_cap: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "ff1,ff2,ff3")]
    variants: Vec<VariantArg>,
    /// Directory for the <variant>.ffm files.
    #[arg(long, default_value = "variants")]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum DatasetArg {
    Mnist,
    Cifar10,
}

#[derive(Clone, Copy, ValueEnum)]
enum ArchArg {
    Auto,
    Lenet5,
    ModifiedLenet5,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Kmeanspp,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Ff1,
    Ff2,
    Ff3,
}

impl From<DatasetArg> for DatasetKind {
    fn from(d: DatasetArg) -> Self {
        match d {
            DatasetArg::Mnist => DatasetKind::Mnist,
            DatasetArg::Cifar10 => DatasetKind::Cifar10,
        }
    }
}

impl From<InitArg> for KMeansInit {
    fn from(i: InitArg) -> Self {
        match i {
            InitArg::Kmeanspp => KMeansInit::KMeansPP,
            InitArg::Random => KMeansInit::Random,
        }
    }
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Test => Split::Test,
        }
    }
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Ff1 => Variant::Ff1,
            VariantArg::Ff2 => Variant::Ff2,
            VariantArg::Ff3 => Variant::Ff3,
        }
    }
}

fn parse_ridge(s: &str) -> std::result::Result<RidgeSpec, String> {
    if s == "auto" {
        return Ok(RidgeSpec::Auto);
    }
    s.parse::<f64>()
        .map(RidgeSpec::Value)
        .map_err(|_| format!("expected 'auto' or a number, got '{s}'"))
}

fn baseline(dataset: DatasetKind, seed: u64) -> RunConfig {
    match dataset {
        DatasetKind::Mnist => RunConfig::mnist_baseline(seed),
        DatasetKind::Cifar10 => RunConfig::cifar10_baseline(seed),
    }
}

fn build_config(args: &FitArgs) -> Result<RunConfig> {
    let dataset: DatasetKind = args.dataset.into();
    let mut config = baseline(dataset, args.seed);
    config.arch = match args.arch {
        ArchArg::Auto => config.arch,
        ArchArg::Lenet5 => Architecture::Lenet5,
        ArchArg::ModifiedLenet5 => Architecture::ModifiedLenet5,
    };
    if let Some(widths) = &args.fc_widths {
        config.fc_widths = widths.clone();
    }
    config.stage_one_clusters = args.clusters.clone();
    config.init = args.init.into();
    config.sample_cap = args.sample_cap;
    config.ridge = args.ridge;
    config.delta_rel = args.delta_rel;
    config.validate()?;
    Ok(config)
}

fn data_root(cli: &Cli) -> Result<PathBuf> {
    cli.data_dir.clone().ok_or_else(|| {
        Error::config("no dataset root: pass --data-dir or set FFCNN_DATA_DIR")
    })
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Fit(args) => {
            let config = build_config(args)?;
            cmd_fit(&config, &data_root(&cli)?, &args.output)?;
        }
        Command::Eval(args) => {
            cmd_eval(
                &args.model,
                &data_root(&cli)?,
                args.split.into(),
                args.output.as_deref(),
            )?;
        }
        Command::Profile(args) => {
            cmd_profile(
                &args.model,
                &data_root(&cli)?,
                args.split.into(),
                args.intervals,
                &args.out_dir,
            )?;
        }
        Command::Variants(args) => {
            let base = baseline(args.dataset.into(), args.seed);
            let mut base = base;
            base.sample_cap = args.sample_cap;
            let variants: Vec<Variant> = args.variants.iter().map(|&v| v.into()).collect();
            cmd_variants(&base, &variants, &data_root(&cli)?, &args.out_dir)?;
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
