use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pd_powers::harness::{load_config, prepare, run_experiment};
use pd_powers::plot::emit_plot;
use pd_powers::{CmdpError, Result};

#[derive(Parser)]
#[command(name = "pd-powers", about = "Primal-dual policy optimization on linear mixture CMDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Run PD-POWERS and the random baseline for every configured seed.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, value_enum)]
        diagnostics: Option<Toggle>,
    },
    /// Render regret and violation charts from a run directory.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the config and the instance it describes without running.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn seed_offset() -> Result<u64> {
    match std::env::var("CMDP_SEED_OFFSET") {
        Err(_) => Ok(0),
        Ok(v) => v
            .trim()
            .parse::<u64>()
            .map_err(|e| CmdpError::Config(format!("CMDP_SEED_OFFSET = {v:?}: {e}"))),
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            out,
            workers,
            diagnostics,
        } => {
            let mut cfg = load_config(&config)?;
            cfg.seed_offset = seed_offset()?;
            if let Some(dir) = out {
                cfg.out_dir = dir;
            }
            if let Some(w) = workers {
                if w == 0 {
                    return Err(CmdpError::Config("--workers must be at least 1".into()));
                }
                cfg.workers = w;
            }
            if let Some(t) = diagnostics {
                cfg.learner.diagnostics = matches!(t, Toggle::On);
            }
            let output = run_experiment(&cfg)?;
            print!("{}", output.summary);
            println!("wrote {}", cfg.out_dir.display());
        }
        Command::Plot { input, out } => {
            for path in emit_plot(&input, &out)? {
                println!("wrote {}", path.display());
            }
        }
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            let prepared = prepare(&cfg)?;
            println!("{}", prepared.report);
            println!("slater margin {:.6}", prepared.comparator.gamma);
            println!("learner {:?}", prepared.learner);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
