//! `seektime`: Kemeny constant, hitting times and renewal statistics of a
//! Markov chain read from CSV or JSON.
//!
//! Exit codes: 0 success, 1 input error, 2 structure error (reducible or
//! effectively reducible chain), 3 internal-consistency failure, 4 Monte
//! Carlo timeout.

mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{debug, error};

use seektime_core::report::{self, Analysis, AnalysisOptions, McOptions, SimulateRequest};
use seektime_core::{
    parse_matrix, validate_stochastic, Error, ErrorClass, InputFormat, SimulationConfig,
    StochasticMatrix,
};

const DEFAULT_STEPS: u64 = 10_000;
const DEFAULT_REPLICAS: u64 = 1_000;
const DEFAULT_SEED: u64 = 42;

#[derive(Parser, Debug)]
#[command(
    name = "seektime",
    version,
    about = "Kemeny constant and friends for finite Markov chains"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Full analysis: w, Z, M, K by three routes, renewal statistics.
    Analyze(CommonArgs),
    /// Run every invariant check (add --mc for Monte Carlo comparisons).
    Verify(CommonArgs),
    /// Monte Carlo estimates for --target and/or --kemeny.
    Simulate(CommonArgs),
    /// Eigenvalues of P and the spectral Kemeny constant.
    Spectrum(CommonArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Transition matrix file (.json for JSON, anything else is CSV).
    path: PathBuf,

    /// Override format detection.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,

    /// Aligned text tables instead of JSON.
    #[arg(long)]
    pretty: bool,

    /// Emit Z and M regardless of chain size (default: only for n <= 100).
    #[arg(long)]
    full: bool,

    /// Relative tolerance for agreement of the three Kemeny routes.
    #[arg(long, env = "SEEKTIME_TOL", default_value_t = report::DEFAULT_KEMENY_TOL)]
    tol: f64,

    /// Include Monte Carlo comparisons (analyze, verify).
    #[arg(long)]
    mc: bool,

    /// Simulation horizon T in steps.
    #[arg(long, default_value_t = DEFAULT_STEPS)]
    steps: u64,

    /// Independent replicas per estimate.
    #[arg(long, default_value_t = DEFAULT_REPLICAS)]
    replicas: u64,

    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,

    /// State to simulate, by label or index.
    #[arg(long)]
    target: Option<String>,

    /// Estimate the Kemeny constant by simulation.
    #[arg(long)]
    kemeny: bool,

    #[arg(long, hide = true)]
    step_cap: Option<u64>,
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Input => 1,
        ErrorClass::Structure => 2,
        ErrorClass::Consistency => 3,
        ErrorClass::Timeout => 4,
    }
}

enum Failure {
    Core(Error),
    Input(String),
    Verification,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn detect_format(path: &Path, arg: Option<FormatArg>) -> InputFormat {
    match arg {
        Some(FormatArg::Csv) => InputFormat::Csv,
        Some(FormatArg::Json) => InputFormat::Json,
        None => match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => InputFormat::Json,
            _ => InputFormat::Csv,
        },
    }
}

fn load(args: &CommonArgs) -> Result<StochasticMatrix, Failure> {
    let bytes = std::fs::read(&args.path)
        .map_err(|e| Failure::Input(format!("cannot read {}: {e}", args.path.display())))?;
    let format = detect_format(&args.path, args.format);
    debug!("reading {} as {format:?}", args.path.display());
    let raw = parse_matrix(&bytes, format)?;
    Ok(validate_stochastic(
        raw,
        seektime_core::chain::DEFAULT_ROW_SUM_TOL,
    )?)
}

fn resolve_state(p: &StochasticMatrix, name: &str) -> Result<usize, Failure> {
    p.state_index(name)
        .ok_or_else(|| Failure::Input(format!("unknown state '{name}'")))
}

fn options(args: &CommonArgs, p: &StochasticMatrix) -> Result<AnalysisOptions, Failure> {
    if args.tol.is_nan() || args.tol <= 0.0 {
        return Err(Failure::Input(format!(
            "--tol must be positive, got {}",
            args.tol
        )));
    }
    let monte_carlo = if args.mc {
        let target = match &args.target {
            Some(name) => resolve_state(p, name)?,
            None => 0,
        };
        SimulationConfig::new(args.seed, args.steps, args.replicas)?;
        Some(McOptions {
            seed: args.seed,
            steps: args.steps,
            replicas: args.replicas,
            target,
        })
    } else {
        None
    };
    Ok(AnalysisOptions {
        kemeny_tol: args.tol,
        full: args.full,
        monte_carlo,
        ..Default::default()
    })
}

fn run(command: Command) -> Result<String, Failure> {
    match command {
        Command::Analyze(args) => {
            let p = load(&args)?;
            let opts = options(&args, &p)?;
            let report = Analysis::run(&p)?.report(&opts)?;
            if let Some(f) = &report.failure {
                error!("{f}");
            }
            Ok(if args.pretty {
                output::analysis_table(&report)
            } else {
                output::to_json(&report)
            })
        }
        Command::Verify(args) => {
            let p = load(&args)?;
            let opts = options(&args, &p)?;
            let report = Analysis::run(&p)?.verify(&opts)?;
            let text = if args.pretty {
                output::verification_table(&report)
            } else {
                output::to_json(&report)
            };
            if report.passed {
                Ok(text)
            } else {
                for c in report.checks.iter().filter(|c| !c.passed) {
                    error!(
                        "check {} failed: {:e} vs bound {:e}",
                        c.name, c.residual, c.tolerance
                    );
                }
                println!("{text}");
                Err(Failure::Verification)
            }
        }
        Command::Simulate(args) => {
            let p = load(&args)?;
            let target = args
                .target
                .as_deref()
                .map(|t| resolve_state(&p, t))
                .transpose()?;
            let req = SimulateRequest {
                target,
                kemeny: args.kemeny,
                config: SimulationConfig::new(args.seed, args.steps, args.replicas)?,
            };
            let report = report::simulate(&p, &req, args.step_cap)?;
            Ok(if args.pretty {
                output::simulation_table(&report)
            } else {
                output::to_json(&report)
            })
        }
        Command::Spectrum(args) => {
            let p = load(&args)?;
            let report = report::spectrum_report(&p)?;
            Ok(if args.pretty {
                output::spectrum_table(&report)
            } else {
                output::to_json(&report)
            })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };

    match run(cli.command) {
        Ok(text) => {
            println!("{}", text.trim_end());
            ExitCode::SUCCESS
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.class()))
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Verification) => ExitCode::from(3),
    }
}
