mod bench;
mod generate;
mod io;
mod methods;
mod model;
mod oracle_check;
mod smooth;
mod sync_cmd;

use clap::{Parser, Subcommand};

/// Spanning-forest estimators for graph smoothing and angular
/// synchronization.
#[derive(Parser)]
#[command(name = "mtsf", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random graph with a noisy connection and optional signal.
    Generate(generate::Args),
    /// Smooth a signal on a graph with one solver arm.
    Smooth(smooth::Args),
    /// Recover node phases from a connection graph.
    Sync(sync_cmd::Args),
    /// Run a runtime-precision sweep described by a JSON config.
    Bench(bench::Args),
    /// Check the sampler and estimators against exhaustive enumeration.
    OracleCheck(oracle_check::Args),
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Generate(args) => generate::run(args),
        Command::Smooth(args) => smooth::run(args),
        Command::Sync(args) => sync_cmd::run(args),
        Command::Bench(args) => bench::run(args),
        Command::OracleCheck(args) => oracle_check::run(args),
    }
}
