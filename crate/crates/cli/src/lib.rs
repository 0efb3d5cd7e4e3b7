//! Config-driven command surface over `counsel_core`.
//!
//! Each command reads one TOML config, applies flag overrides, writes its
//! outputs under `--out` together with `config.resolved.toml` and a
//! `manifest.json` of file hashes, and exits with 0 on success, 2 on a
//! config error, 3 on a data error and 4 on an LLM client error.

mod commands;
pub mod config;
pub mod http;
mod output;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use counsel_core::ErrorKind;

pub use config::{Overrides, Provider, RunConfig};

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError { kind: ErrorKind::Config, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError { kind: ErrorKind::Data, message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Client => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<counsel_core::Error> for CliError {
    fn from(e: counsel_core::Error) -> Self {
        CliError { kind: e.kind(), message: e.to_string() }
    }
}

#[derive(Debug, Parser)]
#[command(name = "counsel", version, about = "Conversation-outcome experiments on counseling transcripts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run config (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the run seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Serve LLM requests from the cache only.
    #[arg(long, global = true)]
    offline: bool,
    /// Use the mock LLM built from the generator latents.
    #[arg(long, global = true)]
    mock: bool,
    /// Write into a non-empty output directory.
    #[arg(long, global = true)]
    force: bool,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus and its latents.
    Synth,
    /// Train the grouped strategy classifier and label unannotated turns.
    Annotate,
    /// Run every LLM step and store the outputs.
    Extract,
    /// Train one grid row on the whole corpus and save it.
    Train,
    /// Cross-validate grid rows and write the report.
    Eval,
    /// Train the stacked ensemble and save it.
    Ensemble,
    /// Shapley attribution for selected sessions.
    Explain,
    /// Cluster summary sentences.
    Cluster,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Annotate => "annotate",
            Command::Extract => "extract",
            Command::Train => "train",
            Command::Eval => "eval",
            Command::Ensemble => "ensemble",
            Command::Explain => "explain",
            Command::Cluster => "cluster",
        }
    }
}

/// Run a resolved config. Exposed for tests and bindings.
pub fn execute(command: Command, cfg: &RunConfig, force: bool) -> Result<(), CliError> {
    output::prepare_out(&cfg.paths.out, force)?;
    commands::dispatch(command, cfg)?;
    output::finish(command.name(), cfg)
}

/// Parse arguments, run, and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let overrides = Overrides { seed: cli.seed, out: cli.out.clone(), offline: cli.offline, mock: cli.mock };
    let result = (|| {
        let base = match &cli.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let cfg = base.resolve(&overrides)?;
        execute(cli.command, &cfg, cli.force)
    })();
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
