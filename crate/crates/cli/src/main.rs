use std::path::PathBuf;
use std::process::ExitCode;

use awdf_cli::run::{self, Fatal, EXIT_USAGE};
use awdf_cli::spec::{DatasetEntry, ExperimentSpec, GridEntry, Settings, StrategyName};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "awdf", version, about = "Adaptive weighted cascade forest benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every cell of an experiment spec file.
    Run(RunArgs),
    /// Evaluate one configuration on one dataset.
    Single(SingleArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment spec.
    spec: PathBuf,
    /// Grid cells evaluated concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Override the spec's repetition count.
    #[arg(long)]
    reps: Option<usize>,
    /// Override the spec's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the spec's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SingleArgs {
    #[arg(long)]
    data: PathBuf,
    /// Label column name or zero-based index (default: last column).
    #[arg(long = "label-col")]
    label_col: Option<String>,
    #[arg(long)]
    no_header: bool,
    /// Dataset name used in reports and manifest checks.
    #[arg(long)]
    name: Option<String>,
    #[arg(long, default_value = "none", value_parser = ["none", "1-w", "1-w2", "1-wsqrt", "l2"])]
    scheme: String,
    #[arg(long, default_value = "baseline", value_parser = clap::value_parser!(StrategyName))]
    strategy: StrategyName,
    #[arg(long)]
    eta: Option<f64>,
    /// Trees per forest; several values give a sweep.
    #[arg(long, value_delimiter = ',', default_value = "100")]
    trees: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cross-fit folds for training-time class vectors; 0 disables.
    #[arg(long = "crossfit-k", default_value_t = 3)]
    crossfit_k: usize,
    #[arg(long = "max-levels", default_value_t = 20)]
    max_levels: usize,
    #[arg(long = "forests", default_value_t = 4)]
    forests_per_level: usize,
    /// Level-count rule: holdout, crossfit or off.
    #[arg(long = "early-stop", default_value = "holdout")]
    early_stop: String,
    #[arg(long, default_value_t = 1)]
    patience: usize,
    /// Directory for results.csv and summary.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn finish(outcome: &run::Outcome, out: Option<&PathBuf>) -> Result<i32, Fatal> {
    if let Some(dir) = out {
        run::write_reports(outcome, dir).map_err(|e| Fatal {
            code: 1,
            message: format!("writing reports to {}: {e}", dir.display()),
        })?;
    }
    print!("{}", outcome.table);
    for f in &outcome.summary.failures {
        eprintln!("failed: {} {} trees={}: {}", f.dataset, f.config, f.trees, f.error);
    }
    Ok(outcome.exit_code())
}

fn run_spec(args: RunArgs) -> Result<i32, Fatal> {
    let mut spec = ExperimentSpec::from_path(&args.spec).map_err(Fatal::usage)?;
    if let Some(r) = args.reps {
        spec.repetitions = r;
    }
    if let Some(s) = args.seed {
        spec.base_seed = s;
    }
    if let Some(o) = args.out {
        spec.output_dir = o;
    }
    spec.check().map_err(Fatal::usage)?;
    let outcome = run::execute(&spec, args.jobs)?;
    finish(&outcome, Some(&spec.output_dir))
}

fn run_single(args: SingleArgs) -> Result<i32, Fatal> {
    let name = args.name.clone().unwrap_or_else(|| {
        args.data
            .file_stem()
            .map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned())
    });
    let spec = ExperimentSpec {
        datasets: vec![DatasetEntry {
            name,
            path: args.data,
            label_column: args.label_col,
            has_header: !args.no_header,
        }],
        grid: vec![GridEntry {
            scheme: args.scheme,
            strategy: args.strategy.to_string(),
            eta: args.eta,
            trees: args.trees,
        }],
        repetitions: args.reps,
        base_seed: args.seed,
        output_dir: args.out.clone().unwrap_or_default(),
        settings: Settings {
            forests_per_level: args.forests_per_level,
            crossfit_k: args.crossfit_k,
            max_levels: args.max_levels,
            early_stop: args.early_stop,
            patience: args.patience,
        },
    };
    spec.check().map_err(Fatal::usage)?;
    let outcome = run::execute(&spec, 1)?;
    for s in &outcome.summary.results {
        println!(
            "{} {} trees={} reps={} accuracy={:.4} +/- {:.4} fit={:.3}s levels={:.2}",
            s.dataset,
            s.config,
            s.trees,
            s.repetitions,
            s.mean_accuracy,
            s.std_accuracy,
            s.mean_fit_seconds,
            s.mean_levels
        );
    }
    finish(&outcome, args.out.as_ref())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run_spec(a),
        Command::Single(a) => run_single(a),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(if f.code == 0 { EXIT_USAGE } else { f.code } as u8)
        }
    }
}
