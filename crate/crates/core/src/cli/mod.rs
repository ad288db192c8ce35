//! Command-line front end.
//!
//! Every subcommand reads one JSON [`RunConfig`] (all fields optional except
//! `seed`), writes per-case files under the output directory and a manifest
//! whose first section is the fully resolved configuration.
//!
//! ```text
//! voxelforge [--config PATH] [--seed N] [--jobs N] [--out DIR] <phantom|preprocess|train|infer|merge|evaluate>
//! ```
//!
//! Logging is controlled by `VOXELFORGE_LOG` (`error`, `info` or `debug`).
//! Failures print `error[<class>]: <message>` on one line and exit with 1.

mod commands;
mod config;
mod jobs;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{
    cmd_evaluate, cmd_infer, cmd_merge, cmd_phantom, cmd_preprocess, cmd_train, list_cases,
    load_training_cases, IMAGES_DIR, LABELS_DIR, SEGV_EXT,
};
pub use config::{
    Command, DataSection, EvaluateSection, FoldSection, InferSection, MergeSection, PhantomSection,
    RunConfig,
};
pub use jobs::parallel_map;

use crate::error::{Error, Result};

pub const LOG_ENV: &str = "VOXELFORGE_LOG";

#[derive(Debug, Parser)]
#[command(
    name = "voxelforge",
    version,
    about = "Brain tumor segmentation at desk scale"
)]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Maximum number of cases or folds processed at once.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Sub {
    /// Write synthetic phantom cases.
    Phantom,
    /// Normalize and crop cases.
    Preprocess,
    /// Cross-validated training; one checkpoint per fold.
    Train,
    /// Ensemble inference with test-time augmentation.
    Infer,
    /// Merge two labelmap directories case by case.
    Merge,
    /// Score predictions against references.
    Evaluate,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Phantom => Command::Phantom,
            Sub::Preprocess => Command::Preprocess,
            Sub::Train => Command::Train,
            Sub::Infer => Command::Infer,
            Sub::Merge => Command::Merge,
            Sub::Evaluate => Command::Evaluate,
        }
    }
}

/// Resolve the configuration, validate it for `cmd` and run it.
pub fn run(
    cmd: Command,
    mut cfg: RunConfig,
    seed: Option<u64>,
    out: Option<PathBuf>,
    jobs: usize,
) -> Result<String> {
    if seed.is_some() {
        cfg.seed = seed;
    }
    if let Some(o) = out {
        cfg.output_dir = o;
    }
    cfg.validate(cmd)?;
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
    match cmd {
        Command::Phantom => cmd_phantom(&cfg, jobs),
        Command::Preprocess => cmd_preprocess(&cfg, jobs),
        Command::Train => cmd_train(&cfg, jobs),
        Command::Infer => cmd_infer(&cfg, jobs),
        Command::Merge => cmd_merge(&cfg, jobs),
        Command::Evaluate => cmd_evaluate(&cfg, jobs),
    }
}

/// Configure `env_logger` from [`LOG_ENV`]; defaults to `info`.
pub fn init_logging() -> Result<()> {
    let level = match std::env::var(LOG_ENV).as_deref() {
        Err(_) | Ok("info") => log::LevelFilter::Info,
        Ok("error") => log::LevelFilter::Error,
        Ok("debug") => log::LevelFilter::Debug,
        Ok(other) => {
            return Err(Error::Config(vec![format!(
                "{LOG_ENV}={other} is not one of error, info, debug"
            )]))
        }
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();
    Ok(())
}

/// One-line rendering of an error for the terminal.
pub fn error_line(e: &Error) -> String {
    format!("error[{}]: {}", e.class(), e.to_string().replace('\n', " "))
}

/// Parse `args`, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) {
                print!("{e}");
                return 0;
            }
            eprintln!(
                "error[usage]: {}",
                e.to_string().lines().next().unwrap_or("invalid arguments")
            );
            return 2;
        }
    };
    let result = init_logging().and_then(|()| {
        let cfg = match &cli.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        run(cli.command.into(), cfg, cli.seed, cli.out.clone(), cli.jobs)
    });
    match result {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("{}", error_line(&e));
            1
        }
    }
}
