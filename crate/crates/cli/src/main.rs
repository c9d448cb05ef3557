//! `chrseg`: command-line pipeline for overlapping-chromosome
//! segmentation — dataset generation, preprocessing, network training,
//! evaluation, classical baselines, and diagnostics.

mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::{
    BaselineArgs, CleanArgs, Ctx, EvalArgs, GenArgs, HistArgs, RenderArgs, SplitArgs, TrainArgs,
};
use config::Settings;
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "chrseg", version, about = "Overlapping-chromosome segmentation pipeline")]
struct Cli {
    /// RNG seed for all stochastic stages [default: 0]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// `key = value` settings file; command-line flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for parallel stages (0 = auto, 1 = sequential)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Generate a synthetic overlapping-chromosome dataset
    Gen(GenArgs),
    /// Repair labels, strip artifacts, and center-crop a dataset
    Clean(CleanArgs),
    /// Split a dataset 64/16/20 into train/val/test files
    Split(SplitArgs),
    /// Train the segmentation network and write a checkpoint
    Train(TrainArgs),
    /// Evaluate a checkpoint on a labeled dataset
    Eval(EvalArgs),
    /// Run a classical baseline on the merged three-class task
    Baseline(BaselineArgs),
    /// Intensity histograms of single-cover vs overlap pixels
    Hist(HistArgs),
    /// Render samples (and predictions) as color-overlay PPM images
    Render(RenderArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut settings = Settings::load(cli.config.as_deref())?;
    let seed = settings.get("seed", cli.seed, 0)?;
    let threads = settings.get_opt("threads", cli.threads)?;
    if let Some(n) = threads {
        // `build_global` fails only if a pool already exists; the run can
        // proceed on that pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let mut ctx =
        Ctx { seed, threads, command_line: std::env::args().collect(), settings };
    match &cli.cmd {
        Cmd::Gen(args) => commands::gen(&mut ctx, args),
        Cmd::Clean(args) => commands::clean(&mut ctx, args),
        Cmd::Split(args) => commands::split_cmd(&mut ctx, args),
        Cmd::Train(args) => commands::train_cmd(&mut ctx, args),
        Cmd::Eval(args) => commands::eval(&mut ctx, args),
        Cmd::Baseline(args) => commands::baseline(&mut ctx, args),
        Cmd::Hist(args) => commands::hist(&mut ctx, args),
        Cmd::Render(args) => commands::render(&mut ctx, args),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage errors exit 1; --help and --version exit 0.
            let code = i32::from(e.use_stderr());
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
