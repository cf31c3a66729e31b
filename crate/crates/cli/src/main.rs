use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use normsim::config::{ConfigError, ExperimentConfig};
use normsim::experiment::{compare, run_experiment, CompareError, ExperimentError, RunSet};
use normsim::metrics::{self, Metric};
use normsim::Society;

#[derive(Parser)]
#[command(
    name = "normsim",
    version,
    about = "Norm emergence in a simulated pandemic"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate one or more societies over a range of seeds.
    Simulate(SimulateArgs),
    /// Compare converged metrics of one society against others.
    Compare(CompareArgs),
}

#[derive(clap::Args)]
struct SimulateArgs {
    /// Society preset; repeat or comma-separate for several.
    #[arg(long, value_delimiter = ',')]
    society: Vec<Society>,
    /// Number of sequential seeds starting at --base-seed.
    #[arg(long)]
    seeds: Option<u32>,
    #[arg(long)]
    base_seed: Option<u64>,
    /// Steps per episode, including the recorded evaluation episode.
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    train_steps: Option<u64>,
    #[arg(long)]
    population: Option<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Parallel runs (0 = all cores).
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Norm listing file replacing the default norm.
    #[arg(long)]
    norms: Option<PathBuf>,
}

#[derive(clap::Args)]
struct CompareArgs {
    /// Run directory of the experimental society.
    #[arg(long)]
    experimental: PathBuf,
    /// Run directories of the control societies.
    #[arg(long, num_args = 1.., required = true)]
    controls: Vec<PathBuf>,
    /// Report CSV; an aligned table is written beside it with a .txt extension.
    #[arg(long)]
    out: PathBuf,
    /// Metrics to compare (default: all).
    #[arg(long, value_delimiter = ',')]
    metrics: Vec<String>,
    /// Trailing steps averaged as the converged value.
    #[arg(long, default_value_t = 500)]
    window: usize,
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let exp = &mut config.experiment;
    if !args.society.is_empty() {
        exp.societies = args.society;
    }
    if let Some(n) = args.seeds {
        exp.num_seeds = n;
        exp.seeds = None;
    }
    if let Some(b) = args.base_seed {
        exp.base_seed = b;
        exp.seeds = None;
    }
    if let Some(out) = args.out {
        exp.output_dir = out;
    }
    if let Some(j) = args.jobs {
        exp.jobs = j;
    }
    if let Some(n) = args.norms {
        exp.norms_file = Some(n);
    }
    if let Some(s) = args.steps {
        config.world.episode_steps = s;
    }
    if let Some(p) = args.population {
        config.world.population = p;
    }
    if let Some(t) = args.train_steps {
        config.learning.training_steps = t;
    }
    let manifests = run_experiment(&config)?;
    let window = config.experiment.convergence_window;
    for m in &manifests {
        let file = fs::File::open(&m.metrics_csv)
            .with_context(|| format!("reading {}", m.metrics_csv.display()))?;
        let rows = metrics::from_csv(file)?;
        let mean = |metric: Metric| {
            let series: Vec<f64> = rows.iter().map(|r| metric.get(r)).collect();
            metrics::tail_mean(&series, window)
        };
        println!(
            "{} seed={} home={:.4} quarantine={:.4} goal={:.4} infected={:.2} csv={}",
            m.society.name(),
            m.seed,
            mean(Metric::Home),
            mean(Metric::Quarantine),
            mean(Metric::Goal),
            mean(Metric::Infected),
            m.metrics_csv.display()
        );
    }
    Ok(())
}

fn run_compare(args: CompareArgs) -> Result<()> {
    let metrics = if args.metrics.is_empty() {
        Metric::ALL.to_vec()
    } else {
        args.metrics
            .iter()
            .map(|name| {
                Metric::from_name(name).ok_or_else(|| anyhow::anyhow!("unknown metric `{name}`"))
            })
            .collect::<Result<_>>()?
    };
    let experimental = RunSet::load(&args.experimental)?;
    let controls = args
        .controls
        .iter()
        .map(|d| RunSet::load(d))
        .collect::<Result<Vec<_>, _>>()?;
    let report = compare(&experimental, &controls, &metrics, args.window)?;
    fs::write(&args.out, report.to_csv())
        .with_context(|| format!("writing {}", args.out.display()))?;
    let table_path = args.out.with_extension("txt");
    let table = report.to_table();
    fs::write(&table_path, &table).with_context(|| format!("writing {}", table_path.display()))?;
    print!("{table}");
    Ok(())
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    if let Some(e) = err.downcast_ref::<ExperimentError>() {
        return match e {
            ExperimentError::Config(_) => "config",
            ExperimentError::Io { .. } => "io",
            ExperimentError::Norms { .. } => "norms",
            ExperimentError::Metrics { .. } => "metrics",
        };
    }
    if err.downcast_ref::<ConfigError>().is_some() {
        return "config";
    }
    if err.downcast_ref::<CompareError>().is_some() {
        return "mismatched_runs";
    }
    if err.downcast_ref::<std::io::Error>().is_some() {
        return "io";
    }
    "error"
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Compare(args) => run_compare(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let message = format!("{err:#}").replace('\n', " ");
            eprintln!("error: {}: {}", error_kind(&err), message);
            ExitCode::FAILURE
        }
    }
}
