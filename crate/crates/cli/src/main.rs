use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use robust_online::pairwise::Side;
use robust_online::verify::Suite;
use robust_online_cli::commands::{self, Axis, PairArgs};
use robust_online_cli::config::{parse_config, ExperimentConfig};
use robust_online_cli::CliError;

#[derive(Parser)]
#[command(name = "robust-online", version, about = "Online classification under adversarial label-noise kernels")]
struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<String>,
    /// Worker threads for Monte Carlo runs.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Overrides the configured base seed.
    #[arg(long, global = true)]
    seed0: Option<u64>,
    /// Output path prefix; overrides the configured one.
    #[arg(long, global = true)]
    out: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Divergences,
    Geometry,
    Ewa,
    Testers,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum SideArg {
    First,
    Second,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo runs of the configured experiment; writes the summary CSV.
    Simulate,
    /// Deterministic property suites.
    Verify {
        #[arg(value_enum, default_value = "all")]
        suite: SuiteArg,
    },
    /// One Monte Carlo batch per value of a parameter; writes the curve CSV.
    Sweep {
        /// Parameter to vary.
        #[arg(long)]
        axis: Axis,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
        /// Also write an SVG chart.
        #[arg(long)]
        svg: bool,
    },
    /// Minimum pairwise gaps of the configured kernel.
    Gap,
    /// Runs one pairwise tester to its decision.
    TestPair {
        #[arg(long, default_value_t = 0)]
        feature: usize,
        #[arg(long, value_delimiter = ',', default_value = "0,1")]
        labels: Vec<usize>,
        #[arg(long, value_enum, default_value = "first")]
        truth: SideArg,
        /// Informative steps before deciding; derived from the gap by default.
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also report the error rate over this many runs.
        #[arg(long, default_value_t = 1)]
        runs: usize,
    },
}

fn load(path: Option<&str>) -> Result<ExperimentConfig, CliError> {
    let path = path.ok_or_else(|| CliError::Validation("--config PATH is required".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("cannot read {path}: {e}")))?;
    parse_config(&text)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let prefix = |cfg: &ExperimentConfig| {
        cli.out
            .clone()
            .or_else(|| cfg.output.clone())
            .unwrap_or_else(|| "robust-online".to_string())
    };
    match &cli.command {
        Command::Simulate => {
            let cfg = load(cli.config.as_deref())?;
            commands::simulate(&cfg, cli.seed0.unwrap_or(cfg.seed0), &prefix(&cfg))
        }
        Command::Verify { suite } => commands::run_verify(match suite {
            SuiteArg::Divergences => Suite::Divergences,
            SuiteArg::Geometry => Suite::Geometry,
            SuiteArg::Ewa => Suite::Ewa,
            SuiteArg::Testers => Suite::Testers,
            SuiteArg::All => Suite::All,
        }),
        Command::Sweep { axis, values, svg } => {
            let cfg = load(cli.config.as_deref())?;
            commands::sweep(&cfg, *axis, values, cli.seed0.unwrap_or(cfg.seed0), &prefix(&cfg), *svg)
        }
        Command::Gap => commands::gap_report(&load(cli.config.as_deref())?),
        Command::TestPair {
            feature,
            labels,
            truth,
            budget,
            seed,
            runs,
        } => {
            let cfg = load(cli.config.as_deref())?;
            let [a, b] = labels[..] else {
                return Err(CliError::Validation("--labels takes exactly two labels".into()));
            };
            commands::test_pair(
                &cfg,
                &PairArgs {
                    feature: *feature,
                    labels: (a, b),
                    truth: match truth {
                        SideArg::First => Side::First,
                        SideArg::Second => Side::Second,
                    },
                    budget: *budget,
                    seed: *seed,
                    runs: *runs,
                },
            )
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.jobs {
        Some(0) => Err(CliError::Validation("--jobs must be >= 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(cli)),
            Err(e) => Err(CliError::Runtime(e.to_string())),
        },
        None => run(cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
