use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cpms::run::{report, run, Task};

#[derive(Parser)]
#[command(name = "cpms", version, about = "Complex porous-media Schrödinger experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the configured equation and write the trajectory.
    Simulate(RunArgs),
    /// Solve a deterministic problem and check the variational certificate.
    Certify(RunArgs),
    /// Residual slope of the path-integral step against its limit equation.
    FeynmanCheck(RunArgs),
    /// Compare solutions across truncation levels.
    ConvergenceStudy(RunArgs),
    /// Compare the assignment-based W₂ against exhaustive search.
    WassersteinSelftest(RunArgs),
    /// Derive plot-ready tables from a results directory.
    Report { dir: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (task, args) = match cli.command {
        Command::Simulate(a) => (Task::Simulate, a),
        Command::Certify(a) => (Task::Certify, a),
        Command::FeynmanCheck(a) => (Task::FeynmanCheck, a),
        Command::ConvergenceStudy(a) => (Task::ConvergenceStudy, a),
        Command::WassersteinSelftest(a) => (Task::WassersteinSelftest, a),
        Command::Report { dir } => return finish(report(&dir)),
    };
    finish(run(task, &args.config, &args.out, args.seed))
}

fn finish(outcome: cpms::run::Outcome) -> ExitCode {
    if outcome.code == 0 {
        println!("{}", outcome.message);
    } else {
        eprintln!("{}", outcome.message);
    }
    ExitCode::from(outcome.code as u8)
}
