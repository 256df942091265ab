use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gevrey_cli::{
    cmd_decay_study, cmd_invariants, cmd_linear_oracle, cmd_simulate, CliError, ExperimentConfig, RunOptions, RunRecord,
};

#[derive(Debug, Parser)]
#[command(
    name = "gevrey-sns",
    version,
    about = "Galerkin experiments for the stochastic Navier-Stokes system with transport noise"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Number of paths, overriding the config.
    #[arg(long)]
    paths: Option<usize>,
    /// Master seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate an ensemble at one cutoff.
    Simulate(Common),
    /// Galerkin errors against a reference cutoff.
    DecayStudy(Common),
    /// Strong error against the closed-form linear solution.
    LinearOracle(Common),
    /// Structural identities and noise validators.
    Invariants(Common),
}

type Runner = fn(&ExperimentConfig, &RunOptions) -> Result<RunRecord, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, cmd): (&Common, Runner) = match &cli.command {
        Command::Simulate(a) => (a, cmd_simulate),
        Command::DecayStudy(a) => (a, cmd_decay_study),
        Command::LinearOracle(a) => (a, cmd_linear_oracle),
        Command::Invariants(a) => (a, cmd_invariants),
    };
    let opts = RunOptions { out: args.out.clone(), paths: args.paths, seed: args.seed, threads: args.threads };
    let result = ExperimentConfig::load(&args.config).and_then(|cfg| cmd(&cfg, &opts));
    match result {
        Ok(record) => {
            for w in &record.warnings {
                eprintln!("warning: {w}");
            }
            println!("{}", serde_json::to_string_pretty(&record.summary).unwrap_or_default());
            println!("wrote {} files to {}", record.manifest.len() + 1, opts.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
