use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use barron_sym::experiments::{self, scenarios, Command, RunOptions, Scenario};

const SEED_ENV: &str = "BARRON_SYM_SEED";

#[derive(Parser)]
#[command(name = "barron-sym", version, about = "Symmetry factor, approximation, complexity and ERM experiments for group-averaged two-layer networks")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Estimate the symmetry factor over the scenario's measures.
    Delta(RunArgs),
    /// Approximation error of sampled networks against width.
    ApproxScaling(RunArgs),
    /// Single-neuron Rademacher estimates, averaged vs trivial group.
    Rademacher(RunArgs),
    /// Regularized ERM test error against sample size.
    Generalize(RunArgs),
    /// Activation constants for the activation zoo.
    Gamma0(RunArgs),
    /// List the builtin scenarios.
    Scenarios,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario config (JSON). `{"builtin": "<name>"}` selects a builtin.
    #[arg(long, required_unless_present = "scenario", conflicts_with = "scenario")]
    config: Option<PathBuf>,
    /// Run a builtin scenario by name.
    #[arg(long)]
    scenario: Option<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write SVG plots where the subcommand has one.
    #[arg(long)]
    svg: bool,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
}

fn load(args: &RunArgs) -> Result<Scenario, String> {
    match (&args.config, &args.scenario) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            Scenario::from_text(&text).map_err(|e| format!("{}: {e}", path.display()))
        }
        (None, Some(name)) => Scenario::builtin(name).map_err(|e| e.to_string()),
        (None, None) => Err("one of --config or --scenario is required".into()),
    }
}

fn seed_override() -> Result<Option<u64>, String> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| format!("{SEED_ENV}={v:?} is not a u64")),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(format!("{SEED_ENV}: {e}")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match cli.command {
        Sub::Delta(a) => (Command::Delta, a),
        Sub::ApproxScaling(a) => (Command::ApproxScaling, a),
        Sub::Rademacher(a) => (Command::Rademacher, a),
        Sub::Generalize(a) => (Command::Generalize, a),
        Sub::Gamma0(a) => (Command::Gamma0, a),
        Sub::Scenarios => {
            for name in scenarios::names() {
                println!("{name}");
            }
            return ExitCode::SUCCESS;
        }
    };
    let prepared = load(&args).and_then(|s| Ok((s, seed_override()?)));
    let (scenario, seed) = match prepared {
        Ok(p) => p,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let opts = RunOptions { svg: args.svg, jobs: args.jobs, seed_override: seed };
    match experiments::run(cmd, &scenario, &opts, &args.out) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
