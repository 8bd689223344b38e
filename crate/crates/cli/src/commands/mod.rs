mod evaluate;
mod ingest;
mod predict;
mod similarity;
mod train;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

/// Exit-code contract for scripting: 1 usage, 2 data, 3 training, 4 model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Usage = 1,
    Data = 2,
    Training = 3,
    Model = 4,
}

pub struct CliError {
    pub code: ExitCode,
    pub error: anyhow::Error,
}

pub type CliResult = Result<(), CliError>;

pub fn fail<T>(code: ExitCode, error: impl Into<anyhow::Error>) -> Result<T, CliError> {
    Err(CliError { code, error: error.into() })
}

pub trait ExitCtx<T> {
    fn or_exit(self, code: ExitCode) -> Result<T, CliError>;
}

impl<T, E: Into<anyhow::Error>> ExitCtx<T> for Result<T, E> {
    fn or_exit(self, code: ExitCode) -> Result<T, CliError> {
        self.map_err(|e| CliError { code, error: e.into() })
    }
}

#[derive(Parser)]
#[command(
    name = "petrel",
    about = "Event extraction and event-property classification for commodity news",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Convert a directory of brat standoff (.ann/.txt) pairs into one
    /// canonical JSON corpus.
    Ingest {
        /// Directory holding .ann/.txt pairs.
        in_dir: PathBuf,
        /// Output corpus JSON path.
        out_file: PathBuf,
    },
    /// Run a training experiment described by a TOML config file.
    Train {
        /// Experiment config (see README for the schema).
        config: PathBuf,
    },
    /// Evaluate a saved model on a canonical corpus.
    Evaluate {
        /// Model directory written by `train`.
        #[arg(long)]
        model: PathBuf,
        /// Canonical corpus JSON.
        #[arg(long)]
        corpus: PathBuf,
        /// Where to write the report JSON (defaults next to the model).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank source corpora by vocabulary overlap with a target corpus.
    Similarity {
        /// Target corpus (plain text or canonical JSON).
        #[arg(long)]
        target: PathBuf,
        /// Source corpora (plain text or canonical JSON).
        #[arg(required = true)]
        sources: Vec<PathBuf>,
        /// Profile size (top-n most frequent words).
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        /// Optional stopword list file (defaults to the shipped list).
        #[arg(long)]
        stopwords: Option<PathBuf>,
        /// Profile cache directory.
        #[arg(long)]
        cache_dir: Option<PathBuf>,
        /// Where to write the ranking JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extract events from raw text or a canonical corpus with a saved model.
    Predict {
        /// Model directory written by `train`.
        #[arg(long)]
        model: PathBuf,
        /// Input file: .json canonical corpus, anything else is raw text.
        #[arg(long)]
        input: PathBuf,
        /// Where to write the prediction JSON (defaults to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Ingest { in_dir, out_file } => ingest::run(&in_dir, &out_file),
        Command::Train { config } => train::run(&config),
        Command::Evaluate { model, corpus, out } => {
            evaluate::run(&model, &corpus, out.as_deref())
        }
        Command::Similarity { target, sources, n, stopwords, cache_dir, out } => {
            similarity::run(&target, &sources, n, stopwords.as_deref(), cache_dir.as_deref(), out.as_deref())
        }
        Command::Predict { model, input, out } => predict::run(&model, &input, out.as_deref()),
    }
}
