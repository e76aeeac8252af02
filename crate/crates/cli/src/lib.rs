//! Command-line driver for the drug sensitivity pipeline.
//!
//! `ingest -> ablate -> split -> prompts | export-finetune -> predict -> evaluate -> report`,
//! plus `serve` for the HTTP front end. Artifacts land under `<out>/<tissue>/<features>/`.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;

use std::ffi::OsString;
use std::io::{IsTerminal, Write};
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use drugsense::eval::ReportFormat;
use drugsense::{FeatureSet, Tissue};

use crate::artifacts::Layout;
use crate::commands::Context;
use crate::config::{Overrides, RunConfig};
use crate::error::{exit, Result};

#[derive(Debug, Parser)]
#[command(
    name = "drugsense",
    version,
    about = "Drug sensitivity prediction pipeline"
)]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(short, long, global = true, default_value = "drugsense.toml")]
    pub config: PathBuf,
    /// Output directory; overrides `paths.output`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Split seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// ln(IC50) threshold below which a pair is sensitive.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub theta: Option<f64>,
    /// Feature set such as `drug,cell_line,smiles`; repeat for several.
    #[arg(long, global = true)]
    pub features: Vec<FeatureSet>,
    /// Tissue code such as LUAD; repeat for several.
    #[arg(long = "tissue", global = true)]
    pub tissues: Vec<Tissue>,
    /// More log output on stderr; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Read the pairs table and annotations; write one labeled cohort per tissue.
    Ingest,
    /// Write one cohort per feature set and print the sizes.
    Ablate,
    /// Stratified train/test split per feature-set cohort.
    Split,
    /// Serialize the test set into prompts.
    Prompts,
    /// Write prompt-completion JSONL for an external fine-tune.
    ExportFinetune,
    /// Complete every test prompt through the configured backend.
    Predict {
        /// Maximum in-flight backend requests.
        #[arg(long)]
        parallelism: Option<usize>,
    },
    /// Score predictions against gold labels.
    Evaluate,
    /// Merge per-cell reports into `<out>/report.{json,csv,md}`.
    Report {
        /// Format echoed to stdout.
        #[arg(long, default_value = "md")]
        format: ReportFormat,
    },
    /// Start the HTTP prediction service.
    Serve {
        #[arg(long)]
        port: Option<u16>,
    },
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => tracing::Level::WARN,
        1 => tracing::Level::INFO,
        _ => tracing::Level::DEBUG,
    };
    let _ = tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_max_level(level)
        .with_target(false)
        .with_ansi(std::io::stderr().is_terminal())
        .try_init();
}

fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    let mut config = RunConfig::load(&cli.config)?;
    let parallelism = match cli.command {
        Command::Predict { parallelism } => parallelism,
        _ => None,
    };
    config.apply(&Overrides {
        seed: cli.seed,
        theta: cli.theta,
        features: cli.features,
        tissues: cli.tissues,
        out: cli.out,
        parallelism,
    });
    config.validate()?;
    let digest = config.digest()?;
    tracing::info!(digest = artifacts::short(&digest), "configuration loaded");
    let mut ctx = Context {
        layout: Layout::new(&config.paths.output),
        config,
        digest,
        stdout,
    };
    match cli.command {
        Command::Ingest => commands::ingest(&mut ctx),
        Command::Ablate => commands::ablate(&mut ctx),
        Command::Split => commands::split(&mut ctx),
        Command::Prompts => commands::prompts(&mut ctx),
        Command::ExportFinetune => commands::export_finetune(&mut ctx),
        Command::Predict { .. } => commands::predict(&mut ctx),
        Command::Evaluate => commands::evaluate(&mut ctx),
        Command::Report { format } => commands::report(&mut ctx, format),
        Command::Serve { port } => commands::serve(&mut ctx, port),
    }
}

/// Parse `args` (program name first), run the subcommand and return the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = stdout.write_all(text.as_bytes());
                    exit::OK
                }
                _ => {
                    let _ = stderr.write_all(text.as_bytes());
                    exit::USAGE
                }
            };
        }
    };
    init_logging(cli.verbose);
    match execute(cli, stdout) {
        Ok(()) => exit::OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
