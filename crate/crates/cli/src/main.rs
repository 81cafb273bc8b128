mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use steingraph::config::DatasetKind;

#[derive(Parser, Debug)]
#[command(name = "steingraph", version, about = "Graph energy models trained with Stein discrepancies")]
struct Cli {
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a dataset and write train/test graph files.
    GenData(GenDataArgs),
    /// Train an energy model.
    Train(TrainArgs),
    /// Draw graphs from a trained model with Langevin dynamics.
    Sample(SampleArgs),
    /// Compare two graph files by degree, clustering and orbit MMD.
    Eval(EvalArgs),
    /// Erdős–Rényi graphs density-matched to a training set.
    Baseline(BaselineArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DatasetArg {
    CommunitySmall,
    EgoSmall,
}

impl From<DatasetArg> for DatasetKind {
    fn from(d: DatasetArg) -> Self {
        match d {
            DatasetArg::CommunitySmall => DatasetKind::CommunitySmall,
            DatasetArg::EgoSmall => DatasetKind::EgoSmall,
        }
    }
}

#[derive(Args, Debug)]
struct GenDataArgs {
    #[arg(long, value_enum)]
    dataset: Option<DatasetArg>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of graphs.
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Edge list for ego-small; the synthetic stand-in is used without it.
    #[arg(long)]
    edge_list: Option<PathBuf>,
    /// Output directory for train.json, test.json and provenance.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training graph file; overrides `train_data`.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Run directory for log.jsonl, latest.ckpt and final.ckpt.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    iterations: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    checkpoint_every: Option<u64>,
    /// Continue from a checkpoint. Its stored config is used.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Stop after this many iterations of this invocation, leaving
    /// latest.ckpt to resume from.
    #[arg(long)]
    stop_after: Option<u64>,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    count: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    langevin_steps: Option<usize>,
    /// Also write one Graphviz file per sample into this directory.
    #[arg(long)]
    dot: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Generated graphs.
    #[arg(long)]
    samples: PathBuf,
    /// Reference graphs, usually the test split.
    #[arg(long)]
    test: PathBuf,
    /// JSON report path.
    #[arg(long)]
    out: PathBuf,
    /// Model name in the report; defaults to the sample file's generator.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    unbiased: bool,
    /// Seed recorded in the report.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct BaselineArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ASTRAGEM_LOG", "info"))
        .format_timestamp(None)
        .init();
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
    {
        log::warn!("thread pool: {e}");
    }
    let result = match cli.command {
        Command::GenData(a) => commands::gen_data(a),
        Command::Train(a) => commands::train(a),
        Command::Sample(a) => commands::sample(a),
        Command::Eval(a) => commands::eval(a),
        Command::Baseline(a) => commands::baseline(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
