//! Driver for configured runs: TOML configuration, flow runs, gamma tables,
//! self-checks and byte-stable artifacts.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod verify;

use std::path::Path;

pub use config::RunConfig;
pub use error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verb {
    Run,
    Verify,
    Gamma,
    Quadforms,
}

pub fn dispatch(verb: Verb, config: &Path, out: &Path) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    match verb {
        Verb::Run => commands::run(&cfg, out),
        Verb::Verify => commands::verify_cmd(&cfg, out),
        Verb::Gamma => commands::gamma(&cfg, out),
        Verb::Quadforms => commands::quadforms(&cfg, out),
    }
}
