use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mcre_lab::runner::{emit_plots, output_root, run_experiment, ExperimentConfig, PlotSummary};
use mcre_lab::Error;

#[derive(Parser)]
#[command(name = "mcre-lab", version, about = "Run configured experiments and emit plot data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Worker threads; results do not depend on this.
        #[arg(long)]
        threads: Option<usize>,
        /// Output root; defaults to $MCRE_LAB_OUT, then ./mcre-lab-out.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides master_seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write .dat and .svg files for the CSVs in a result directory.
    Plot { dir: PathBuf },
}

const CONFIG_ERROR: u8 = 2;
const ASSUMPTION_FAILED: u8 = 3;
const CHECK_FAILED: u8 = 4;

fn exit_for(err: &Error) -> ExitCode {
    let code = match err {
        Error::Config(_) | Error::InvalidSpec(_) | Error::OutOfRange(_) | Error::AtomLimit { .. } => CONFIG_ERROR,
        Error::AssumptionFailed(_) => ASSUMPTION_FAILED,
        _ => 1,
    };
    eprintln!("error: {err}");
    ExitCode::from(code)
}

fn run(config: PathBuf, threads: Option<usize>, out: Option<PathBuf>, seed: Option<u64>) -> ExitCode {
    let text = match std::fs::read_to_string(&config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", config.display());
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    let mut cfg = match ExperimentConfig::from_toml(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error in {}: {e}", config.display());
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    if let Some(s) = seed {
        cfg.set_master_seed(s);
    }
    if threads == Some(0) {
        eprintln!("error: --threads must be positive");
        return ExitCode::from(CONFIG_ERROR);
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    };
    let root = output_root(out.as_deref());
    match pool.install(|| run_experiment(&cfg, &root)) {
        Ok(outcome) => {
            println!("kind: {}", cfg.kind());
            println!("master_seed: {}", cfg.master_seed());
            println!("output: {}", outcome.dir.display());
            for c in &outcome.checks {
                println!("check {}: {} ({})", c.name, if c.passed { "pass" } else { "FAIL" }, c.detail);
            }
            if outcome.passed() {
                ExitCode::SUCCESS
            } else {
                eprintln!("failed checks: {}", outcome.failed_checks().join(", "));
                ExitCode::from(CHECK_FAILED)
            }
        }
        Err(e) => exit_for(&e),
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, threads, out, seed } => run(config, threads, out, seed),
        Command::Plot { dir } => match emit_plots(&dir) {
            Ok(PlotSummary::NothingToPlot) => {
                println!("nothing to plot in {}", dir.display());
                ExitCode::SUCCESS
            }
            Ok(PlotSummary::Written(files)) => {
                for f in files {
                    println!("{}", f.display());
                }
                ExitCode::SUCCESS
            }
            Err(e) => exit_for(&e),
        },
    }
}
