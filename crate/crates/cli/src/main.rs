//! `publicspeak` command-line interface.

mod commands;
mod inputs;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Exit status for usage and configuration errors.
const EXIT_USAGE: u8 = 2;
const EXIT_RUNTIME: u8 = 1;

#[derive(Parser, Debug)]
#[command(name = "publicspeak", version, about = "Find public comments in city-council meeting transcripts")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Seed recorded in every output and passed to the solver and learner.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// TOML or JSON experiment configuration. Flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Log more (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

/// ADMM settings shared by every command that solves.
#[derive(Args, Debug, Clone, Default)]
pub struct SolverFlags {
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    eps_abs: Option<f64>,
    #[arg(long)]
    eps_rel: Option<f64>,
}

/// Corpus, locales and AI-signal tables.
#[derive(Args, Debug, Clone)]
pub struct DataFlags {
    /// Corpus file (JSON document or newline-delimited meetings).
    #[arg(long)]
    corpus: PathBuf,
    /// Locale file or a directory of `.toml`/`.json` locale files.
    #[arg(long)]
    locales: PathBuf,
    /// Predicate-table file(s) with SectionGenAI and RemarkTypePLM atoms.
    #[arg(long)]
    tables: Vec<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Clean and group raw diarized segments into a corpus file.
    Ingest(commands::IngestArgs),
    /// Compute observed predicate tables for every meeting.
    Featurize(commands::FeaturizeArgs),
    /// Label every utterance with MAP inference.
    Infer(commands::InferArgs),
    /// Learn rule weights from labeled meetings.
    Learn(commands::LearnArgs),
    /// Run the chronological or leave-one-city-out protocol.
    Eval(commands::EvalArgs),
    /// Generate a seeded synthetic corpus.
    Synth(commands::SynthArgs),
    /// Render the PC-F1 table of a saved experiment report.
    Report(commands::ReportArgs),
}

/// Marks an error as the caller's fault (exit status 2).
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<publicspeak::Error>() {
            return if e.is_usage() { EXIT_USAGE } else { EXIT_RUNTIME };
        }
    }
    EXIT_RUNTIME
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    if let Some(n) = cli.global.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    }

    let result = match cli.command {
        Command::Ingest(a) => commands::ingest(&cli.global, a),
        Command::Featurize(a) => commands::featurize(&cli.global, a),
        Command::Infer(a) => commands::infer(&cli.global, a),
        Command::Learn(a) => commands::learn(&cli.global, a),
        Command::Eval(a) => commands::eval(&cli.global, a),
        Command::Synth(a) => commands::synth(&cli.global, a),
        Command::Report(a) => commands::report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
