use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use config::{Overrides, Paths};

/// Curate compositional test sets, score retrieval and fit the
/// frequency-based performance predictor.
#[derive(Debug, Parser)]
#[command(name = "compgen", version, arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a concept index from a JSON-lines corpus.
    Ingest,
    /// Print per-concept frequencies and index totals.
    Stats,
    /// Label test samples as known, novel or excluded.
    Curate,
    /// Rank gallery embeddings and write per-sample outcomes.
    Eval,
    /// Fit the logistic predictor per label with bootstrap intervals.
    Fit,
    /// Generate a synthetic Zipf corpus, test set and outcomes.
    Simulate,
    /// Render CSV tables and SVG panels from a finished run.
    Report,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// JSON file of dotted keys; command-line flags take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// JSON-lines corpus with id, caption and tags.
    #[arg(long, global = true, value_name = "PATH")]
    corpus: Option<PathBuf>,
    /// Concept vocabulary, one lemma per line.
    #[arg(long, global = true, value_name = "PATH")]
    vocab: Option<PathBuf>,
    /// Irregular-noun table replacing the built-in one.
    #[arg(long, global = true, value_name = "PATH")]
    exceptions: Option<PathBuf>,
    /// Concept index file.
    #[arg(long, global = true, value_name = "PATH")]
    index: Option<PathBuf>,
    /// Test manifest (curate) or curated records (eval).
    #[arg(long, global = true, value_name = "PATH")]
    manifest: Option<PathBuf>,
    /// Query-side embedding matrix.
    #[arg(long, global = true, value_name = "PATH")]
    queries: Option<PathBuf>,
    /// Gallery-side embedding matrix.
    #[arg(long, global = true, value_name = "PATH")]
    gallery: Option<PathBuf>,
    /// Outcomes CSV; defaults to outcomes.csv in the output directory.
    #[arg(long, global = true, value_name = "PATH")]
    outcomes: Option<PathBuf>,
    /// Simulation spec JSON.
    #[arg(long, global = true, value_name = "PATH")]
    spec: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed for bootstrap and simulation.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Comma-separated recall cutoffs [default: 1,5,10].
    #[arg(long, global = true, value_name = "LIST")]
    k: Option<String>,
    /// Cutoff the predictor is fitted and plotted on [default: 10].
    #[arg(long, global = true)]
    fit_k: Option<usize>,
    /// Space for the outlier filter: log or linear [default: log].
    #[arg(long, global = true, value_name = "SPACE")]
    iqr_space: Option<String>,
    /// IQR fence multiplier [default: 1.5].
    #[arg(long, global = true, value_name = "X")]
    iqr_mult: Option<f64>,
    /// Bootstrap replicates [default: 1000].
    #[arg(long, global = true, value_name = "B")]
    bootstrap: Option<usize>,
    /// Confidence level for intervals [default: 0.95].
    #[arg(long, global = true, value_name = "LEVEL")]
    ci_level: Option<f64>,
    /// Gallery to rank against: full or curated [default: full].
    #[arg(long, global = true, value_name = "SCOPE")]
    gallery_scope: Option<String>,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            paths: Paths {
                corpus: self.corpus.clone(),
                vocab: self.vocab.clone(),
                exceptions: self.exceptions.clone(),
                index: self.index.clone(),
                manifest: self.manifest.clone(),
                queries: self.queries.clone(),
                gallery: self.gallery.clone(),
                outcomes: self.outcomes.clone(),
                spec: self.spec.clone(),
                out: self.out.clone(),
            },
            seed: self.seed,
            ks: self.k.clone(),
            iqr_space: self.iqr_space.clone(),
            iqr_mult: self.iqr_mult,
            bootstrap: self.bootstrap,
            ci_level: self.ci_level,
            fit_k: self.fit_k,
            gallery_scope: self.gallery_scope.clone(),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("COMPGEN_LOG", "warn")).init();
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
    let outcome = std::panic::catch_unwind(|| commands::run(&cli));
    match outcome {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if commands::is_internal(&e) { 2 } else { 1 })
        }
        Err(_) => ExitCode::from(2),
    }
}
