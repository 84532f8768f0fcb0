use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use splitlocus::{run, scenario_file, Command, RunError, RunOptions};

/// Hamilton-Jacobi singular sets and balanced split loci.
#[derive(Debug, Parser)]
#[command(name = "splitlocus", version)]
struct Cli {
    command: Command,
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory for artifacts and report.json.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Double the boundary mesh this many times.
    #[arg(long, default_value_t = 0)]
    refine: u32,
    /// Overrides the seed of the scenario file.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let file = match scenario_file::read(&cli.scenario) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("{}: {e}", cli.scenario.display());
            return ExitCode::from(2);
        }
    };
    let opts = RunOptions { out: cli.out, refine: cli.refine, seed: cli.seed };
    match run(cli.command, &file, &opts) {
        Ok(report) => {
            for c in &report.checks {
                let verdict = if c.passed { "PASS" } else { "FAIL" };
                println!("{verdict} {} (value {:e}, tolerance {:e})", c.name, c.value, c.tolerance);
                if let Some(w) = &c.witness {
                    println!("  witness: {w}");
                }
            }
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e @ RunError::Scenario(_)) => {
            eprintln!("{}: {e}", cli.scenario.display());
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
    }
}
