use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use viscobeam_cli::commands::out_dir;
use viscobeam_cli::{dispatch, Verb};

/// Viscoelastic beam flows and dimension-reduction checks.
///
/// Artifacts go to the directory named by VISCOBEAM_OUT (default `out`).
#[derive(Parser)]
#[command(name = "viscobeam", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the gradient flow and write the ledger, snapshots and manifest.
    Run { config: PathBuf },
    /// Run the self-check suites; exits 1 if any check fails.
    Verify { config: PathBuf },
    /// Build the gamma convergence table from the [dimred] section.
    Gamma { config: PathBuf },
    /// Print the reduced quadratic-form constants.
    Quadforms { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (verb, config) = match cli.command {
        Command::Run { config } => (Verb::Run, config),
        Command::Verify { config } => (Verb::Verify, config),
        Command::Gamma { config } => (Verb::Gamma, config),
        Command::Quadforms { config } => (Verb::Quadforms, config),
    };
    match dispatch(verb, &config, &out_dir()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
