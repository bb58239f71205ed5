use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use radreact_cli::{dispatch, Command};

#[derive(Parser)]
#[command(name = "radreact", version, about = "Run radiating-charge scenarios from JSON configs")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a single scenario.
    Run(Args),
    /// Paired run with deviation table and fitted exponent.
    Compare(Args),
    /// Run every variant of a sweep config.
    Sweep(Args),
}

#[derive(clap::Args)]
struct Args {
    config: PathBuf,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let (command, args) = match cli.command {
        Cmd::Run(a) => (Command::Run, a),
        Cmd::Compare(a) => (Command::Compare, a),
        Cmd::Sweep(a) => (Command::Sweep, a),
    };
    match dispatch(command, &args.config, args.jobs) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("radreact: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
