use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use gapfield::cli::{run, Command, RunOptions, Scenario};
use gapfield::transform::InjectedFault;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Validate,
    Solve,
    Sweep,
    Harnack,
    Layers,
    Fit,
    Report,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Fault {
    FlipNormalCross,
}

/// Gradient experiments for the insulated conductivity problem between two close inclusions.
#[derive(Debug, Parser)]
#[command(name = "gapfield", version)]
struct Args {
    #[arg(value_enum)]
    command: Cmd,
    /// Scenario file (`section.key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV files.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Run every stage on the calling thread.
    #[arg(long)]
    serial: bool,
    /// Write grid and matrix dumps under `<out>/dump`.
    #[arg(long)]
    debug_dump: bool,
    #[arg(long, value_enum, hide = true)]
    inject_fault: Option<Fault>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Ok(v) = std::env::var("GAPFIELD_THREADS") {
        match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                {
                    eprintln!("error: GAPFIELD_THREADS: {e}");
                    return ExitCode::from(2);
                }
            }
            _ => {
                eprintln!("error: GAPFIELD_THREADS must be a positive integer, got `{v}`");
                return ExitCode::from(2);
            }
        }
    }
    let scenario = match Scenario::load(&args.config) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    let command = match args.command {
        Cmd::Validate => Command::Validate,
        Cmd::Solve => Command::Solve,
        Cmd::Sweep => Command::Sweep,
        Cmd::Harnack => Command::Harnack,
        Cmd::Layers => Command::Layers,
        Cmd::Fit => Command::Fit,
        Cmd::Report => Command::Report,
    };
    let opts = RunOptions {
        out: args.out,
        parallel: !args.serial,
        debug_dump: args.debug_dump,
        fault: args
            .inject_fault
            .map(|Fault::FlipNormalCross| InjectedFault::FlipNormalCross),
    };
    match run(command, &scenario, &opts) {
        Ok(outcome) => {
            for l in &outcome.lines {
                println!("{l}");
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
