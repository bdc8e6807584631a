mod commands;
mod failure;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use failure::Failure;

/// Explore a classified literature survey and generate the papers it is missing.
#[derive(Debug, Parser)]
#[command(name = "gapscope", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Where the survey comes from: a built snapshot, or the raw inputs.
#[derive(Debug, Clone, Args)]
pub struct Source {
    /// Snapshot directory written by `ingest`.
    #[arg(long, conflicts_with_all = ["config", "sheet", "constraints"])]
    pub snapshot: Option<PathBuf>,
    /// Survey configuration (YAML).
    #[arg(short = 'c', long)]
    pub config: Option<PathBuf>,
    /// Sheet export (CSV); defaults to the file named in the config.
    #[arg(short = 's', long)]
    pub sheet: Option<PathBuf>,
    /// Semantic constraint file.
    #[arg(short = 'x', long)]
    pub constraints: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a snapshot directory from the raw survey inputs.
    Ingest(IngestArgs),
    /// Check every known paper against the hierarchy and the constraints.
    Validate {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        json: bool,
    },
    /// Count the feature profiles no known paper has yet.
    Count(CountArgs),
    /// Generate new feature profiles with their nearest known papers.
    Recommend(RecommendArgs),
    /// Match reference lists against the survey's titles.
    Citations(CitationArgs),
    /// Write the theory as DIMACS or the compiled graph as NNF.
    Export(ExportArgs),
    /// Serve the JSON API (and optionally a static UI bundle).
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Survey configuration (YAML).
    #[arg(short = 'c', long)]
    pub config: PathBuf,
    /// Sheet export (CSV); defaults to the file named in the config.
    #[arg(short = 's', long)]
    pub sheet: Option<PathBuf>,
    /// Output snapshot directory.
    #[arg(short = 'o', long)]
    pub out: PathBuf,
    /// Semantic constraint file.
    #[arg(short = 'x', long)]
    pub constraints: Option<PathBuf>,
    /// Preference list, one signed classpath per line.
    #[arg(short = 'p', long)]
    pub preferences: Option<PathBuf>,
    /// Directory of `<paper id>.txt` documents for the citation graphs.
    #[arg(long)]
    pub texts: Option<PathBuf>,
    /// Precomputed document embeddings, `<paper id> v1 v2 …` per line.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Match thresholds to precompute citation graphs for.
    #[arg(long, value_delimiter = ',', default_value = "0.15,0.25,0.35")]
    pub thresholds: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct CountArgs {
    #[command(flatten)]
    pub source: Source,
    /// Count a DIMACS CNF file instead of a survey theory.
    #[arg(long, conflicts_with_all = ["snapshot", "config", "sheet", "constraints"])]
    pub dimacs: Option<PathBuf>,
    /// Condition the compiled DIMACS theory on a literal (repeatable).
    #[arg(long, allow_hyphen_values = true, requires = "dimacs")]
    pub assume: Vec<i32>,
    /// Check decomposability and determinism of the compiled graph.
    #[arg(long, requires = "dimacs")]
    pub audit: bool,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct RecommendArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(short = 'k', default_value_t = 1)]
    pub k: usize,
    /// Preference list overriding the snapshot's.
    #[arg(short = 'p', long)]
    pub preferences: Option<PathBuf>,
    /// Classpath (or `~classpath`) every recommendation must satisfy.
    #[arg(long, allow_hyphen_values = true)]
    pub focus: Vec<String>,
    #[arg(long, default_value_t = 60)]
    pub timeout_secs: u64,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct CitationArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long)]
    pub texts: PathBuf,
    #[arg(long, default_value_t = gapscope_core::citations::DEFAULT_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, conflicts_with = "json")]
    pub dot: bool,
    #[arg(long)]
    pub json: bool,
    /// Write to a file instead of stdout.
    #[arg(short = 'o', long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(id = "format", required = true, multiple = false, args = ["dimacs", "nnf"])]
pub struct ExportArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long)]
    pub dimacs: bool,
    #[arg(long)]
    pub nnf: bool,
    #[arg(short = 'o', long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub snapshot: PathBuf,
    #[arg(long, default_value_t = gapscope_server::DEFAULT_PORT)]
    pub port: u16,
    #[arg(long, default_value_t = 60)]
    pub recommend_timeout_secs: u64,
    #[arg(long, default_value_t = gapscope_server::DEFAULT_WORKERS)]
    pub workers: usize,
    #[arg(long)]
    pub cors_origin: Option<String>,
    /// Directory holding the built UI bundle, served under `/`.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let detail = e.to_string();
            let first = detail.lines().next().unwrap_or("invalid arguments");
            let first = first.trim_start_matches("error: ");
            return failure::report(&Failure::usage(first));
        }
    };
    let result = match cli.command {
        Command::Ingest(a) => commands::ingest(&a),
        Command::Validate { source, json } => commands::validate(&source, json),
        Command::Count(a) => commands::count(&a),
        Command::Recommend(a) => commands::recommend(&a),
        Command::Citations(a) => commands::citations(&a),
        Command::Export(a) => commands::export(&a),
        Command::Serve(a) => commands::serve(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => failure::report(&failure::classify(&e)),
    }
}
