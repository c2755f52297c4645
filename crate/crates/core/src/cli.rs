//! Command-line front end: `serve`, `highlight`, `replay` and `metrics`.
//!
//! Exit status is 0 on success, 1 for usage errors and 2 for runtime failures.

use std::ffi::OsString;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::backend::{Backend, MockBackend, MockConfig};
use crate::error::{Error, Result};
use crate::feedback::{amplification_ratio, export_feedback, replay, EventLog};
use crate::highlight::{Format, HighlightEngine, IntensityScale};
use crate::service::{self, ServiceConfig};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_RUNTIME: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "cowrite", version, about = "Interaction-required co-writing engine")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP service until interrupted.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Score a document and print its edit opportunities.
    Highlight {
        #[arg(long, default_value = "")]
        prompt: String,
        /// Document file, or `-` for stdin.
        #[arg(long)]
        doc: PathBuf,
        #[arg(long, default_value = "ansi")]
        format: Format,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Re-execute a session log and check it reproduces exactly.
    Replay {
        #[arg(long)]
        log: PathBuf,
        /// Write the shown-versus-taken feedback dataset.
        #[arg(long)]
        export_feedback: bool,
        /// Destination for the dataset; stdout when omitted.
        #[arg(long, requires = "export_feedback")]
        out: Option<PathBuf>,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Print the amplification report of a finalized session log.
    Metrics {
        #[arg(long)]
        log: PathBuf,
        #[command(flatten)]
        backend: BackendArgs,
    },
}

/// Model selection shared by the offline commands. Without either flag the
/// built-in sample corpus backs a mock model.
#[derive(Debug, Clone, Args)]
pub struct BackendArgs {
    /// Service config file naming the backend.
    #[arg(long, conflicts_with = "corpus")]
    pub config: Option<PathBuf>,
    /// Corpus for a mock backend.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
}

impl BackendArgs {
    pub fn load(&self) -> Result<Arc<dyn Backend>> {
        match &self.corpus {
            Some(path) => Ok(Arc::new(MockBackend::from_path(path, MockConfig::default())?)),
            None => ServiceConfig::load(self.config.as_deref())?.load_backend(),
        }
    }
}

/// Parses `args` and runs the command, writing results to `out` and
/// diagnostics to `err`. Returns the exit status.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{rendered}")
            } else {
                write!(out, "{rendered}")
            };
            return code;
        }
    };
    match execute(cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_RUNTIME
        }
    }
}

pub fn execute(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match command {
        Command::Serve { config } => {
            let config = ServiceConfig::load(config.as_deref())?;
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(service::serve(config))
        }
        Command::Highlight {
            prompt,
            doc,
            format,
            backend,
        } => {
            let document = read_document(&doc)?;
            let engine = HighlightEngine::new(backend.load()?);
            let report = engine.compute_highlights(&prompt, &document)?;
            out.write_all(format.render(&report, IntensityScale::default()).as_bytes())?;
            Ok(())
        }
        Command::Replay {
            log,
            export_feedback: export,
            out: dest,
            backend,
        } => {
            let log = EventLog::read(&log)?;
            let outcome = replay(&log, backend.load()?)?;
            writeln!(
                err,
                "replayed {} events of session {}: deterministic, {} suggestion sets",
                outcome.events_checked,
                outcome.session_id,
                outcome.suggestion_sets.len()
            )?;
            if export {
                let dataset = export_feedback(&log)?;
                match dest {
                    Some(path) => {
                        let file = std::fs::File::create(&path).map_err(|e| Error::file(&path, e))?;
                        dataset.write_jsonl(std::io::BufWriter::new(file))?;
                    }
                    None => dataset.write_jsonl(&mut *out)?,
                }
            } else {
                let summary = serde_json::json!({
                    "session_id": outcome.session_id,
                    "events_checked": outcome.events_checked,
                    "composed_text": outcome.composed_text,
                    "suggestion_sets": outcome.suggestion_sets.len(),
                    "finalized": outcome.finalized,
                    "ratio": outcome.report.as_ref().and_then(|r| r.ratio),
                });
                writeln!(out, "{summary}")?;
            }
            Ok(())
        }
        Command::Metrics { log, backend } => {
            let log = EventLog::read(&log)?;
            let backend = backend.load()?;
            if log.header().model_id != backend.model_id() {
                return Err(Error::Config(format!(
                    "log was recorded with model {} but the backend is {}",
                    log.header().model_id,
                    backend.model_id()
                )));
            }
            let report = amplification_ratio(log.events(), backend.as_ref())?;
            writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
            Ok(())
        }
    }
}

fn read_document(path: &Path) -> Result<String> {
    if path == Path::new("-") {
        let mut text = String::new();
        std::io::stdin().read_to_string(&mut text)?;
        Ok(text)
    } else {
        std::fs::read_to_string(path).map_err(|e| Error::file(path, e))
    }
}
