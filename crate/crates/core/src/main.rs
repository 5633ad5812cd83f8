use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use drxlab::config::{ExperimentConfig, Grid};
use drxlab::experiment::{exit_code, run_experiment, Outcome, Subcommand, EXIT_CONFIG};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    /// Steady-state power saving and mean delay of the configured DRX timers.
    Analytic,
    /// Monte Carlo simulation of the configured timers and IT policy.
    Simulate,
    /// Search for the DRX timers maximizing power saving under the delay budget.
    Optimize,
    /// Optimize and simulate every (lambda, TTI, policy) cell.
    Sweep,
    /// Delay CDF of the optimized configuration per IT policy.
    Cdf,
    /// Relative power of intelligent IT handling across delay budgets.
    DelaySweep,
}

impl From<Command> for Subcommand {
    fn from(c: Command) -> Self {
        match c {
            Command::Analytic => Subcommand::Analytic,
            Command::Simulate => Subcommand::Simulate,
            Command::Optimize => Subcommand::Optimize,
            Command::Sweep => Subcommand::Sweep,
            Command::Cdf => Subcommand::Cdf,
            Command::DelaySweep => Subcommand::DelaySweep,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GridArg {
    Reduced,
    Full,
}

/// DRX power-saving experiments: analytic model, simulator and optimizers.
#[derive(Debug, Parser)]
#[command(name = "drxlab", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Configuration file (`section.key = value` lines). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Overrides `sim.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `sim.runs`.
    #[arg(long)]
    runs: Option<usize>,
    /// Overrides `opt.grid`.
    #[arg(long, value_enum)]
    grid: Option<GridArg>,
}

fn load(cli: &Cli) -> drxlab::Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.sim.seed = seed;
    }
    if let Some(runs) = cli.runs {
        config.sim.runs = runs;
    }
    if let Some(grid) = cli.grid {
        config.opt.grid = match grid {
            GridArg::Reduced => Grid::Reduced,
            GridArg::Full => Grid::Full,
        };
    }
    config.validate()?;
    Ok(config)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG as u8 } else { 0 });
        }
    };
    let result = load(&cli).and_then(|config| run_experiment(cli.command.into(), &config, &cli.out));
    match &result {
        Ok(Outcome::Done { rows }) => eprintln!("wrote {rows} rows to {}", cli.out.display()),
        Ok(Outcome::Infeasible) => eprintln!(
            "no configuration meets the delay budget; best effort written to {}",
            cli.out.display()
        ),
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(exit_code(&result) as u8)
}
