//! Command-line front end: job parsing, dispatch and exit codes.
//!
//! Exit codes: 0 success, 2 invalid job, 3 constraint violated,
//! 4 verification failed.

pub mod commands;
pub mod error;
pub mod job;
pub mod output;
pub mod reproduce;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use error::CliError;
use job::{Command, JobArgs, JobSpec};

#[derive(Debug, Parser)]
#[command(name = "pulseforge", version, about = "Exact control pulses for a driven two-level system")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// List the built-in generator families and P(q) profiles.
    List(JobArgs),
    /// Synthesize J(t) and U(t) and write them as CSV.
    Synth(JobArgs),
    /// Synthesize, then compare against the numerical propagator.
    Verify(JobArgs),
    /// Build q(t) from a velocity profile P(q) and synthesize it.
    Wgen(JobArgs),
    /// Net gate of an even pulse, or tune a pulse to a target rotation.
    Rotate(JobArgs),
    /// Emit the data and gnuplot scripts for the reference figures.
    Reproduce(JobArgs),
    /// Run the job described by a config file.
    Run {
        /// JSON job file.
        config: PathBuf,
    },
}

impl CliCommand {
    fn split(&self) -> (Option<Command>, JobArgs) {
        match self {
            CliCommand::List(a) => (Some(Command::List), a.clone()),
            CliCommand::Synth(a) => (Some(Command::Synth), a.clone()),
            CliCommand::Verify(a) => (Some(Command::Verify), a.clone()),
            CliCommand::Wgen(a) => (Some(Command::Wgen), a.clone()),
            CliCommand::Rotate(a) => (Some(Command::Rotate), a.clone()),
            CliCommand::Reproduce(a) => (Some(Command::Reproduce), a.clone()),
            CliCommand::Run { config } => (None, JobArgs { config: Some(config.clone()), ..Default::default() }),
        }
    }
}

pub fn execute(job: &JobSpec) -> Result<(), CliError> {
    match job.command {
        Command::List => commands::cmd_list(job),
        Command::Synth => commands::cmd_synth(job),
        Command::Verify => commands::cmd_verify(job),
        Command::Wgen => commands::cmd_wgen(job),
        Command::Rotate => commands::cmd_rotate(job),
        Command::Reproduce => {
            let records = reproduce::cmd_reproduce(job)?;
            for r in &records {
                match &r.error {
                    None => eprintln!("{} {:<10} {:<12} ok", r.figure, r.family, r.label),
                    Some(e) => eprintln!("{} {:<10} {:<12} FAILED: {e}", r.figure, r.family, r.label),
                }
            }
            Ok(())
        }
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> u8 {
    let (command, args) = cli.command.split();
    let result = args.resolve(command).and_then(|job| {
        if args.print_config {
            println!("{}", serde_json::to_string_pretty(&job)?);
            Ok(())
        } else {
            execute(&job)
        }
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error ({}): {e}", e.kind());
            e.exit_code()
        }
    }
}
