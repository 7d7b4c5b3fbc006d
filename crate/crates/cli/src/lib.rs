//! Command-line front end for `covpath`: input loading, instance
//! generation, path and online solves, benchmarks, and re-verification of
//! saved outputs.

pub mod args;
pub mod commands;
pub mod error;
pub mod generate;
pub mod io;
pub mod summary;

pub use error::{CliError, InputError};

/// Dispatches a parsed command line.
pub fn run(cli: args::Cli) -> Result<(), CliError> {
    match cli.command {
        args::Command::Solve(a) => commands::solve(&a).map(drop),
        args::Command::Online(a) => commands::online(&a).map(drop),
        args::Command::Bench(a) => commands::bench(&a).map(drop),
        args::Command::Verify(a) => commands::verify(&a).map(drop),
    }
}
