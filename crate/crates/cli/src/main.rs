//! `sncf`: detection of in-distribution label noise and out-of-distribution
//! samples from contrastive features.
//!
//! Exit codes: 0 success, 1 invalid input or configuration, 2 numerical failure.

mod commands;
mod config;
mod error;
mod manifest;
mod tables;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use commands::*;
use error::{CliError, CliResult};
use manifest::ManifestBuilder;

#[derive(Debug, Parser)]
#[command(name = "sncf", version, about = "Label-noise and OOD detection on feature matrices")]
struct Cli {
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "SNCF_THREADS")]
    threads: Option<usize>,
    /// Record wall-clock duration in report manifests (reports then differ between runs).
    #[arg(long, global = true)]
    record_timing: bool,
    /// Raise log verbosity; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic feature set with planted ID and OOD noise.
    Synth(SynthArgs),
    /// Spectral embedding of the kNN affinity graph.
    Embed(EmbedArgs),
    /// OPTICS ordering and ξ clusters of a point matrix.
    Optics(OpticsArgs),
    /// Two-component Gaussian mixture.
    Gmm(GmmArgs),
    /// Classify samples as clean, ID-noisy or OOD.
    Detect(DetectArgs),
    /// Linear separability of OOD from ID samples.
    Probe(ProbeArgs),
    /// Precision, recall and F1 of verdicts against ground truth.
    Score(ScoreArgs),
    /// Finite-difference check of every loss gradient.
    LossesCheck(LossesCheckArgs),
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::validation("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::validation(format!("cannot start {t} threads: {e}")))?;
    }
    let manifest = |name| ManifestBuilder::new(name, cli.record_timing);
    match &cli.command {
        Command::Synth(a) => synth(a),
        Command::Embed(a) => embed(a, manifest("embed")),
        Command::Optics(a) => optics(a),
        Command::Gmm(a) => gmm(a, manifest("gmm")),
        Command::Detect(a) => detect(a, manifest("detect")),
        Command::Probe(a) => probe(a),
        Command::Score(a) => score(a, manifest("score")),
        Command::LossesCheck(a) => losses_check(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
