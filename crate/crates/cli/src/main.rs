//! `geotwin` — trajectory-prediction pipeline front end.
//!
//! Subcommands cover the full loop: generate synthetic trajectories, train
//! the two predictors, evaluate and annotate recorded runs, replay an
//! annotated run onto the in-process stream with live pacing, and reproduce
//! the witnessed-delay table.
//!
//! Exit codes: 0 success, 1 stage failure (stderr names the stage), 2 usage.

mod commands;
mod config;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "geotwin",
    version,
    about = "Vehicle trajectory digital-twin pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic trajectory CSV.
    GenData(commands::gen_data::Args),
    /// Fit the standardizer and the chosen predictors on a trajectory CSV.
    Train(commands::train::Args),
    /// Score saved models against a trajectory CSV.
    Evaluate(commands::evaluate::Args),
    /// Append per-model predicted coordinates to a trajectory CSV.
    Annotate(commands::annotate::Args),
    /// Stream an annotated CSV through the broker at recorded pacing.
    Replay(commands::replay::Args),
    /// Write the communication-delay comparison table.
    DelayReport(commands::delay_report::Args),
}

/// Errors surfaced to the user, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Flag/config resolution problems; exit code 2.
    Usage(String),
    /// A pipeline stage failed; exit code 1.
    Stage {
        stage: &'static str,
        message: String,
    },
}

impl CliError {
    pub fn stage(stage: &'static str, err: impl std::fmt::Display) -> Self {
        Self::Stage {
            stage,
            message: err.to_string(),
        }
    }
}

fn main() {
    // Die quietly when a downstream pipe closes (`geotwin ... | head`),
    // like other unix CLI tools, instead of panicking mid-print.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }

    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenData(args) => commands::gen_data::run(&args),
        Command::Train(args) => commands::train::run(&args),
        Command::Evaluate(args) => commands::evaluate::run(&args),
        Command::Annotate(args) => commands::annotate::run(&args),
        Command::Replay(args) => commands::replay::run(&args),
        Command::DelayReport(args) => commands::delay_report::run(&args),
    };
    let code = match result {
        Ok(()) => 0,
        Err(CliError::Usage(message)) => {
            eprintln!("usage error: {message}");
            2
        }
        Err(CliError::Stage { stage, message }) => {
            eprintln!("error in stage {stage}: {message}");
            1
        }
    };
    std::process::exit(code);
}
