use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use vmme::harness::{self, ExperimentConfig};
use vmme::Error;

/// Signaling workload generator and vMME queueing simulator.
#[derive(Parser)]
#[command(name = "vmme", version)]
struct Cli {
    /// TOML experiment file; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the capacity-sweep delay budget, milliseconds.
    #[arg(long, global = true)]
    budget_ms: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate users and write the control-message trace.
    GenerateTrace,
    /// Analytic procedure rates over the timer sweep.
    PredictRates {
        /// Also simulate every timer value and report RMSE.
        #[arg(long)]
        empirical: bool,
    },
    /// Run the queue network on a trace file.
    Simulate {
        #[arg(long)]
        trace: PathBuf,
    },
    /// Mean delay per population and instance count, with capacities.
    CapacitySweep,
    /// Instances recommended for a population.
    Advise { users: u64 },
    /// Print the effective configuration as TOML.
    ShowConfig,
}

fn load(cli: &Cli) -> vmme::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(b) = cli.budget_ms {
        cfg.sweep.budget_ms = b;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> vmme::Result<String> {
    if let Command::Advise { users } = cli.command {
        return Ok(harness::cmd_advise(users));
    }
    let cfg = load(cli)?;
    let out = harness::output_dir(&cfg, cli.out.as_deref());
    match &cli.command {
        Command::GenerateTrace => harness::cmd_generate_trace(&cfg, &out),
        Command::PredictRates { empirical } => harness::cmd_predict_rates(&cfg, &out, *empirical),
        Command::Simulate { trace } => harness::cmd_simulate(&cfg, trace, &out),
        Command::CapacitySweep => harness::cmd_capacity_sweep(&cfg, &out),
        Command::ShowConfig => Ok(cfg.to_toml()),
        Command::Advise { .. } => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io { .. } => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}
