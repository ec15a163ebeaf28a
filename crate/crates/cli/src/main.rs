use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kslice_cli::config::{CommonArgs, Merged};
use kslice_cli::{cmd_build, cmd_search, cmd_sweep, cmd_verify_lemmas, write_output, CliError, BUILD_ID};

#[derive(Parser)]
#[command(name = "kslice", version = BUILD_ID, about = "Convex bodies and densities with small codimension-k sections")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the lemma suite over an (n, k) grid
    VerifyLemmas {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, hide = true)]
        corrupt_tolerance: bool,
    },
    /// Build one construction and write its report
    Build {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// One construction per (n, k) cell, one CSV row each
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Re-run the max-section search on a saved build report
    Search {
        #[command(flatten)]
        common: CommonArgs,
        /// Build report written by `kslice build`
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let (outcome, merged) = match cli.command {
        Command::VerifyLemmas { common, corrupt_tolerance } => {
            let m = Merged::from_args(&common, None)?;
            (cmd_verify_lemmas(&m, corrupt_tolerance)?, m)
        }
        Command::Build { common } => {
            let m = Merged::from_args(&common, None)?;
            (cmd_build(&m)?, m)
        }
        Command::Sweep { common } => {
            let m = Merged::from_args(&common, None)?;
            (cmd_sweep(&m)?, m)
        }
        Command::Search { common, input } => {
            let m = Merged::from_args(&common, input)?;
            (cmd_search(&m)?, m)
        }
    };
    write_output(merged.out.as_deref(), &outcome.body)?;
    eprintln!("{}", outcome.summary);
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("kslice: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
