use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use scaml_core::benchmarks::load_tabular;
use scaml_core::harness::{
    run_experiment, summary_path, write_results_csv, Benchmark, ExperimentConfig, Method, Seeds, Suite,
};
use scaml_core::Error;

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "scaml-gp", version, about = "Meta-learned Gaussian process Bayesian optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an optimization experiment and write regret CSVs.
    Run(RunArgs),
    /// Run the numerical self-checks.
    Verify {
        /// Suite to run; all suites when omitted.
        #[arg(value_enum)]
        suite: Option<Suite>,
    },
    /// Validate a lookup-table CSV.
    TabularCheck { path: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// branin, hartmann3, hartmann6 or tabular:<path>.
    #[arg(long)]
    benchmark: Option<String>,
    #[arg(long, value_enum)]
    method: Option<Method>,
    #[arg(long)]
    meta_tasks: Option<usize>,
    #[arg(long)]
    points_per_task: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    /// A count `n` for seeds 0..n, or a comma-separated list.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    noise_std: Option<f64>,
    #[arg(long)]
    beta_sqrt: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record fit and acquisition wall times in the CSV.
    #[arg(long)]
    timings: bool,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => EXIT_IO,
        _ => EXIT_CONFIG,
    }
}

fn build_config(args: RunArgs) -> Result<ExperimentConfig, Error> {
    let benchmark = args.benchmark.as_deref().map(str::parse::<Benchmark>).transpose()?;
    let mut cfg = match (&args.config, benchmark.clone(), args.method) {
        (Some(path), _, _) => ExperimentConfig::load(path)?,
        (None, Some(b), Some(m)) => ExperimentConfig::new(b, m),
        _ => return Err(Error::Config("either --config or both --benchmark and --method are required".into())),
    };
    if let Some(b) = benchmark {
        cfg.benchmark = b;
    }
    if let Some(m) = args.method {
        cfg.method = m;
    }
    if let Some(v) = args.meta_tasks {
        cfg.meta_tasks = v;
    }
    if let Some(v) = args.points_per_task {
        cfg.points_per_task = v;
    }
    if let Some(v) = args.iterations {
        cfg.iterations = v;
    }
    if let Some(s) = &args.seeds {
        cfg.seeds = s.parse::<Seeds>()?;
    }
    if let Some(v) = args.noise_std {
        cfg.noise_std = Some(v);
    }
    if let Some(v) = args.beta_sqrt {
        cfg.acquisition.beta_sqrt = v;
    }
    if let Some(p) = args.out {
        cfg.output = p;
    }
    cfg.timings |= args.timings;
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: RunArgs) -> ExitCode {
    let cfg = match build_config(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let outcome = match run_experiment(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    for f in &outcome.failures {
        eprintln!("seed {} failed: {}", f.seed, f.message);
    }
    if outcome.runs.is_empty() {
        eprintln!("error: every seed failed");
        return ExitCode::from(EXIT_CHECK_FAILED);
    }
    if let Err(e) = write_results_csv(&outcome.runs, &cfg.output, cfg.timings) {
        eprintln!("error: {e}");
        return ExitCode::from(exit_code(&e));
    }
    let truncated = outcome.runs.iter().filter(|r| r.truncated).count();
    println!(
        "{} {} on {}: {} seeds ok, {} failed, {} truncated; wrote {} and {}",
        cfg.method,
        cfg.iterations,
        cfg.benchmark,
        outcome.runs.len(),
        outcome.failures.len(),
        truncated,
        cfg.output.display(),
        summary_path(&cfg.output).display()
    );
    ExitCode::SUCCESS
}

fn verify(suite: Option<Suite>) -> ExitCode {
    let suites = suite.map_or(Suite::ALL.to_vec(), |s| vec![s]);
    let mut ok = true;
    for s in suites {
        match s.run() {
            Ok(report) => {
                println!("{report}");
                ok &= report.passed;
            }
            Err(e) => {
                println!("{}: FAIL error: {e}", s.name());
                ok = false;
            }
        }
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECK_FAILED)
    }
}

fn tabular_check(path: PathBuf) -> ExitCode {
    match load_tabular(&path) {
        Ok(t) => {
            let (row, value) = t.best();
            println!(
                "{}: {} rows, {} columns, best value {value} at row {row}",
                path.display(),
                t.len(),
                t.dim()
            );
            ExitCode::SUCCESS
        }
        Err(e @ Error::Io { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_IO)
        }
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            ExitCode::from(EXIT_CHECK_FAILED)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => run(args),
        Command::Verify { suite } => verify(suite),
        Command::TabularCheck { path } => tabular_check(path),
    }
}
