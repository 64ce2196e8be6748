mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use csvae_core::io::RunConfig;
use csvae_core::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "csvae", version, about = "Conditional subspace VAE laboratory")]
struct Cli {
    /// Run configuration (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (output file for generate-data).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset file.
    GenerateData(GenerateArgs),
    /// Train a model; writes a checkpoint, loss curve and run manifest.
    Train(TrainArgs),
    /// Evaluate checkpoints: switch accuracy, paired MSE, MI probe.
    Eval(EvalArgs),
    /// Write attribute-switched outputs.
    Switch(SwitchArgs),
    /// Scatter plots of the latent planes.
    PlotLatent(PlotArgs),
    /// Dump and verify a checkpoint.
    Inspect(InspectArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GeneratorArg {
    SwissRoll,
    Glyphs,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(value_enum)]
    pub generator: GeneratorArg,
    /// Examples (pairs when --paired).
    #[arg(long)]
    pub n: Option<usize>,
    /// Swiss-roll noise standard deviation.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Glyph attributes, comma separated (stripes, frame).
    #[arg(long, value_delimiter = ',')]
    pub attrs: Option<Vec<String>>,
    /// Emit identity pairs differing only in the first attribute.
    #[arg(long)]
    pub paired: bool,
    /// Glyph canvas size in pixels.
    #[arg(long)]
    pub size: Option<usize>,
    /// Scale features to zero mean and unit variance over the train split.
    #[arg(long)]
    pub standardize: bool,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Dataset file (overrides data.path).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Model kind (overrides model.kind).
    #[arg(long)]
    pub kind: Option<String>,
    /// Epoch budget (overrides optim.epochs).
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Continue from a checkpoint written by `train`.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Model checkpoints; one table row each.
    #[arg(long = "checkpoint", required = true)]
    pub checkpoints: Vec<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    /// Switched-output accuracy under each model's standard policy.
    #[arg(long)]
    pub method1: bool,
    /// Identity-paired squared error (needs a paired dataset).
    #[arg(long)]
    pub method2: bool,
    /// Label information in z.
    #[arg(long)]
    pub mi: bool,
    /// Attribute classifier checkpoint for --method1.
    #[arg(long)]
    pub classifier: Option<PathBuf>,
    /// Train the attribute classifier on the dataset (saved to the output
    /// directory).
    #[arg(long)]
    pub train_classifier: bool,
    /// Attribute for --method2 (name or index; default the first).
    #[arg(long)]
    pub attr: Option<String>,
    /// W grid points per dimension for --method2.
    #[arg(long, default_value_t = 5)]
    pub grid_steps: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    /// CSVAE: W grid around the attribute-on prior mean.
    Grid,
    /// CSVAE: mean +- 1 and 2 standard deviations along principal components.
    Pca,
    /// CondVAE variants: conditioning values from --p.
    ScalarP,
    /// VAE: class-mean latent translation.
    ClassMean,
    /// CSVAE: the W block of --source-row applied to every input.
    Fixed,
    /// CSVAE, two attributes: 3 x 3 product of styles.
    Cartesian,
}

#[derive(Args, Debug)]
pub struct SwitchArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub policy: PolicyArg,
    /// Input rows (default: the first --count test rows).
    #[arg(long, value_delimiter = ',')]
    pub rows: Option<Vec<usize>>,
    #[arg(long, default_value_t = 4)]
    pub count: usize,
    /// Attribute to manipulate (name or index; default the first).
    #[arg(long)]
    pub attr: Option<String>,
    /// Grid points per W dimension.
    #[arg(long, default_value_t = 4)]
    pub steps: usize,
    /// Principal components for --policy pca.
    #[arg(long, default_value_t = 2)]
    pub components: usize,
    /// Conditioning values for --policy scalar-p.
    #[arg(long, value_delimiter = ',', default_value = "0,0.5,1,1.5,2")]
    pub p: Vec<f64>,
    /// Target attribute state for class-mean and scalar-p switching.
    #[arg(long, default_value_t = 1)]
    pub target: u8,
    /// Style donor row for --policy fixed.
    #[arg(long)]
    pub source_row: Option<usize>,
}

#[derive(Args, Debug)]
pub struct PlotArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Skip the probe accuracies in the captions.
    #[arg(long)]
    pub no_probes: bool,
}

#[derive(Args, Debug)]
pub struct InspectArgs {
    pub checkpoint: PathBuf,
}

/// Global settings after applying flag overrides.
pub struct Context {
    pub config: RunConfig,
    pub out: Option<PathBuf>,
}

impl Context {
    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| self.config.out_dir.clone())
    }
}

fn context(cli: &Cli) -> Result<Context> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    Ok(Context {
        config,
        out: cli.out.clone(),
    })
}

fn run(cli: Cli) -> Result<()> {
    if cli.threads == 0 {
        return Err(Error::Config("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let ctx = context(&cli)?;
    match &cli.command {
        Command::GenerateData(a) => commands::generate::run(&ctx, a),
        Command::Train(a) => commands::train::run(ctx, a),
        Command::Eval(a) => commands::eval::run(&ctx, a),
        Command::Switch(a) => commands::switch::run(&ctx, a),
        Command::PlotLatent(a) => commands::plot::run(&ctx, a),
        Command::Inspect(a) => commands::inspect::run(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
