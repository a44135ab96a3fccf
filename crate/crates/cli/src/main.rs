use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use symtrace_cli::commands;
use symtrace_cli::scenario::{Scenario, BUNDLED_C3_SPIN_HALF};
use symtrace_cli::{CliError, CliResult, Context};

#[derive(Parser, Debug)]
#[command(name = "symtrace", version, about = "Symmetry- and spin-resolved semiclassical trace formulae")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario JSON; the bundled C3 spin-1/2 testbed when absent.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Output directory, overriding the scenario's.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed, overriding the scenario's.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; all cores when absent.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Character table of the double group.
    Group,
    /// Spin-algebra checks.
    Spin,
    /// Periodic-orbit search or database load.
    Orbits,
    /// Per-irrep semiclassical level densities.
    Density,
    /// Spectral determinants and their zeros.
    Specdet,
    /// Projected quantum spectra and degeneracy checks.
    Quantum,
    /// Quantum versus semiclassical comparison.
    Compare,
    /// Structural self-checks.
    Selftest,
}

fn run(cli: &Cli) -> CliResult<Vec<PathBuf>> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(format!("--threads: {e}")))?;
    }
    let scenario = match &cli.scenario {
        Some(path) => Scenario::load(path)?,
        None => Scenario::from_json(BUNDLED_C3_SPIN_HALF)?,
    };
    let ctx = Context::new(&scenario, cli.out.as_deref(), cli.seed)?;
    match cli.command {
        Command::Group => commands::run_group(&ctx),
        Command::Spin => commands::run_spin(&ctx),
        Command::Orbits => commands::run_orbits(&ctx),
        Command::Density => commands::run_density(&ctx),
        Command::Specdet => commands::run_specdet(&ctx),
        Command::Quantum => commands::run_quantum(&ctx),
        Command::Compare => commands::run_compare(&ctx),
        Command::Selftest => commands::run_selftest(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
