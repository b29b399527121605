use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use memkern::config::{Experiment, ExperimentConfig};
use memkern::run::{run, EXIT_ERROR};
use memkern::Error;

#[derive(Parser)]
#[command(name = "memkern", version, about = "Distributed-order kernels, subdiffusion solver and verification harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample k, k₁, 1∗k, l and r_θ on the time grid.
    Kernels(Args),
    /// Certify kernel bounds, Φ inequalities, the Sonine identity and scaling.
    Verify(Args),
    /// Solve the subdiffusion problem.
    Solve(Args),
    /// Measure weak Harnack ratios over a random ensemble.
    Harnack(Args),
    /// Fit the dyadic oscillation decay exponent.
    Holder(Args),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Overrides n_steps.
    #[arg(long)]
    steps: Option<usize>,
    /// Overrides params.seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn load(experiment: Experiment, args: &Args) -> Result<ExperimentConfig, Error> {
    let text = std::fs::read_to_string(&args.config)?;
    let mut config: ExperimentConfig = serde_json::from_str(&text)?;
    if let Some(declared) = config.experiment {
        if declared != experiment {
            let mut report = memkern::ValidationReport::default();
            report.push(
                "/experiment",
                format!("config declares {} but the command is {}", declared.name(), experiment.name()),
            );
            return Err(Error::Validation(report));
        }
    }
    config.experiment = Some(experiment);
    if let Some(steps) = args.steps {
        config.n_steps = steps;
    }
    if let Some(seed) = args.seed {
        config.params.seed = Some(seed);
    }
    config.validate().into_result()?;
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, args) = match &cli.command {
        Command::Kernels(a) => (Experiment::Kernels, a),
        Command::Verify(a) => (Experiment::Verify, a),
        Command::Solve(a) => (Experiment::Solve, a),
        Command::Harnack(a) => (Experiment::Harnack, a),
        Command::Holder(a) => (Experiment::Holder, a),
    };
    let outcome = load(experiment, args).and_then(|config| run(&config, &args.out));
    match outcome {
        Ok(outcome) => {
            println!("{}: wrote {} to {}", experiment.name(), outcome.files.join(", "), args.out.display());
            if outcome.violations > 0 {
                eprintln!("{} hard-inequality violations", outcome.violations);
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(Error::Validation(report)) => {
            for v in &report.violations {
                eprintln!("{}", serde_json::to_string(v).unwrap_or_else(|_| v.to_string()));
            }
            ExitCode::from(EXIT_ERROR as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
