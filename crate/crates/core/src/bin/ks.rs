//! `ks classify|feasible|simulate|sweep`.
//!
//! Exit codes: 0 covered / feasible / completed, 1 invalid input or I/O
//! failure, 2 suspected blow-up, 3 not covered / no witness.

use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ks_core::exponents::{ExponentCase, ModelParams};
use ks_core::harness::{self, EXIT_ERROR};

#[derive(Parser)]
#[command(name = "ks", version, about = "Keller-Segel boundedness laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ExponentArgs {
    /// Spatial dimension.
    #[arg(short = 'n', long = "dim")]
    n: u32,
    #[arg(long, allow_hyphen_values = true)]
    alpha: f64,
    #[arg(long, allow_hyphen_values = true)]
    beta: f64,
    #[arg(long, allow_hyphen_values = true)]
    gamma: f64,
}

#[derive(Args)]
struct RunArgs {
    /// INI configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override a config value, e.g. `--set kinetics.mu=2`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Check a parameter tuple against the coverage condition.
    Classify(ExponentArgs),
    /// Construct a (p, q) exponent witness.
    Feasible {
        #[command(flatten)]
        params: ExponentArgs,
        /// subquadratic | quadratic (default: chosen from gamma).
        #[arg(long)]
        case: Option<ExponentCase>,
    },
    /// Run one simulation and write series and snapshot CSVs.
    Simulate(RunArgs),
    /// Run a parameter sweep and write the phase diagram CSV.
    Sweep(RunArgs),
}

fn params(a: &ExponentArgs) -> Result<ModelParams, String> {
    ModelParams::exponents_only(a.n, a.alpha, a.beta, a.gamma).map_err(|e| e.to_string())
}

fn read_config(args: &RunArgs) -> Result<String, String> {
    std::fs::read_to_string(&args.config).map_err(|e| format!("reading {}: {e}", args.config.display()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { EXIT_ERROR } else { 0 };
            return ExitCode::from(code as u8);
        }
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let code = match &cli.command {
        Command::Classify(a) => match params(a) {
            Ok(p) => harness::cmd_classify(&p, &mut out),
            Err(e) => fail(&e),
        },
        Command::Feasible { params: a, case } => match params(a) {
            Ok(p) => harness::cmd_feasible(&p, *case, &mut out),
            Err(e) => fail(&e),
        },
        Command::Simulate(args) => match read_config(args) {
            Ok(text) => harness::cmd_simulate(&text, &args.set, &args.out, &mut out),
            Err(e) => fail(&e),
        },
        Command::Sweep(args) => match read_config(args) {
            Ok(text) => harness::cmd_sweep(&text, &args.set, &args.out, &mut out),
            Err(e) => fail(&e),
        },
    };
    let _ = out.flush();
    ExitCode::from(code as u8)
}

fn fail(message: &str) -> i32 {
    eprintln!("error: {message}");
    EXIT_ERROR
}
