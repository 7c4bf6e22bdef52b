use clap::{Parser, Subcommand};
use std::process::ExitCode;

mod replay;
mod serve;
mod validate;

#[derive(Parser)]
#[command(
    name = "wheelsim",
    version,
    about = "Headless wheelchair driving simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a recorded input trace through a level and write the session report.
    Replay(replay::Args),
    /// Check a level file for parse, invariant and accessibility problems.
    Validate(validate::Args),
    /// Serve levels and live sessions over HTTP and WebSocket.
    Serve(serve::Args),
}

/// Error with the process exit code it maps to.
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    /// Bad or missing input files.
    pub fn input(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 2,
            error: error.into(),
        }
    }

    pub fn runtime(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 1,
            error: error.into(),
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();

    let cli = Cli::parse();
    let result = match cli.command {
        Command::Replay(args) => replay::run(args),
        Command::Validate(args) => validate::run(args),
        Command::Serve(args) => serve::run(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure { code, error }) => {
            eprintln!("wheelsim: {error:#}");
            ExitCode::from(code)
        }
    }
}
