use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use bornlab::cli::{configure_threads, dispatch, Command};
use bornlab::config::{parse_config, OutputFormat, RunConfig};
use clap::{Parser, ValueEnum};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Patterns,
    Sorkin,
    Run,
    SweepPower,
    SweepMask,
    SweepDetector,
    Hierarchy,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Patterns => Command::Patterns,
            Cmd::Sorkin => Command::Sorkin,
            Cmd::Run => Command::Run,
            Cmd::SweepPower => Command::SweepPower,
            Cmd::SweepMask => Command::SweepMask,
            Cmd::SweepDetector => Command::SweepDetector,
            Cmd::Hierarchy => Command::Hierarchy,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

/// Triple-slit Born-rule null experiment simulator.
///
/// Worker threads can be capped with BORNLAB_THREADS.
#[derive(Debug, Parser)]
#[command(name = "bornlab", version)]
struct Args {
    command: Cmd,
    /// Key-value config file; all keys optional.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Counts file for `sorkin` (columns combination,counts,dwell_s).
    #[arg(long)]
    counts: Option<PathBuf>,
}

fn load(args: &Args) -> bornlab::Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| bornlab::Error::Io {
                path: path.clone(),
                source,
            })?;
            parse_config(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    if let Some(format) = args.format {
        cfg.format = match format {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        };
    }
    if let Some(counts) = &args.counts {
        cfg.counts_input = Some(counts.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = configure_threads()
        .and_then(|_| load(&args))
        .and_then(|cfg| dispatch(args.command.into(), &cfg));
    match result {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            // a closed stdout (e.g. piped into head) is not an error
            let mut out = std::io::stdout().lock();
            let _ = outcome
                .report
                .iter()
                .try_for_each(|line| writeln!(out, "{line}"))
                .and_then(|_| {
                    outcome
                        .files
                        .iter()
                        .try_for_each(|f| writeln!(out, "wrote {}", f.display()))
                });
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
