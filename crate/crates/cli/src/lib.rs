//! Library side of the `qh` command: argument parsing, validation and the
//! commands themselves. Every command writes only inside its output
//! directory and is deterministic given its arguments and seed.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use thiserror::Error;

use quantal_hierarchy::density::DensityError;
use quantal_hierarchy::eval::EvalError;
use quantal_hierarchy::experiment::PredictError;
use quantal_hierarchy::fitting::FitError;
use quantal_hierarchy::observations::DataError;
use quantal_hierarchy::QHError;

pub use commands::*;
pub use config::{Command, RawConfig, RunConfig, DEFAULT_OUTPUT_DIR, OUTPUT_DIR_ENV};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("data error: {0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Data(_) => 4,
        }
    }
}

impl From<PredictError> for CliError {
    fn from(e: PredictError) -> Self {
        match e {
            PredictError::Unsupported { .. } => CliError::Config(e.to_string()),
            PredictError::Solver(q) => q.into(),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

impl From<QHError> for CliError {
    fn from(e: QHError) -> Self {
        match e {
            QHError::InvalidParams(_) => CliError::Config(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<DensityError> for CliError {
    fn from(e: DensityError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Solver(e.to_string())
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        match e {
            FitError::Data(d) => d.into(),
            FitError::EmptyObservations | FitError::InsufficientData(_) => CliError::Data(e.to_string()),
            FitError::ZeroBudget => CliError::Config(e.to_string()),
            FitError::Predict(p) | FitError::ModelEvaluationFailure { source: p, .. } => p.into(),
            FitError::Eval(v) => v.into(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "qh",
    version,
    about = "Quantal Hierarchy and baseline models of bounded rationality on market entrance, beauty contest, centipede and bargaining games"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Prediction of one model on one game
    Predict(Opts),
    /// Fit model families to observation data
    Fit(Opts),
    /// Cross-validated comparison and ranking of model families
    Evaluate(Opts),
    /// Sweep the echo threshold of a QH model on a market or beauty game
    Sensitivity(Opts),
    /// Write the data series behind the standard figures
    ExportPlotData(Opts),
    /// List accepted game keys and model families
    ListGames(Opts),
    /// Generate synthetic observations from known models
    Synth(Opts),
}

#[derive(Debug, Args, Clone, Default)]
pub struct Opts {
    /// Game key (repeatable), e.g. ultimatum:10-10 or market:block1
    #[arg(long = "game", value_name = "KEY")]
    pub games: Vec<String>,
    /// Model string (repeatable), e.g. qh:beta=0.08,gamma=0.76
    #[arg(long = "model", value_name = "MODEL")]
    pub models: Vec<String>,
    /// Comma-separated families to fit [default: qh,levelk,ch,qre,nash]
    #[arg(long = "models", value_name = "LIST")]
    pub models_families: Option<String>,
    /// Observation CSV (header game,role,choice,count)
    #[arg(long, value_name = "FILE")]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory [default: $QH_OUTPUT_DIR, else ./qh-out]
    #[arg(long = "out", value_name = "DIR")]
    pub output_dir: Option<PathBuf>,
    /// Bandwidth rule for smoothed targets: scott, silverman or isj
    #[arg(long)]
    pub bandwidth: Option<String>,
    /// Echo threshold for QH models [default: 1e-8]
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Objective evaluations per fit [default: 1000]
    #[arg(long)]
    pub budget: Option<usize>,
    /// Observations per cell for synth [default: 200]
    #[arg(long)]
    pub units: Option<usize>,
}

impl Opts {
    fn into_raw(self) -> RawConfig {
        RawConfig {
            games: self.games,
            models: self.models,
            families: self.models_families,
            data: self.data,
            seed: self.seed,
            output_dir: self.output_dir,
            bandwidth: self.bandwidth,
            epsilon: self.epsilon,
            budget: self.budget,
            units: self.units,
        }
    }
}

/// Help epilogue listing every accepted game key and model family.
pub fn help_epilogue() -> String {
    format!(
        "{}\nOutput goes to --out, else ${OUTPUT_DIR_ENV}, else ./{DEFAULT_OUTPUT_DIR}.\n\
         Exit codes: 0 ok, 2 configuration, 3 solver, 4 data.",
        list_games_text()
    )
}

/// The clap command with the dynamic help text attached.
pub fn clap_command() -> clap::Command {
    let epilogue = help_epilogue();
    Cli::command()
        .after_help(epilogue.clone())
        .mut_subcommands(move |s| s.after_help(epilogue.clone()))
}

impl Cmd {
    pub fn into_config(self, env_output_dir: Option<String>) -> Result<RunConfig, CliError> {
        let (command, opts) = match self {
            Cmd::Predict(o) => (Command::Predict, o),
            Cmd::Fit(o) => (Command::Fit, o),
            Cmd::Evaluate(o) => (Command::Evaluate, o),
            Cmd::Sensitivity(o) => (Command::Sensitivity, o),
            Cmd::ExportPlotData(o) => (Command::ExportPlotData, o),
            Cmd::ListGames(o) => (Command::ListGames, o),
            Cmd::Synth(o) => (Command::Synth, o),
        };
        RunConfig::from_raw(command, opts.into_raw(), env_output_dir)
    }
}

/// Parses `args` (program name first). Help and usage errors are returned
/// as clap errors for the caller to print.
pub fn parse_args<I, S>(args: I) -> Result<Cmd, clap::Error>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let matches = clap_command().try_get_matches_from(args)?;
    Ok(Cli::from_arg_matches(&matches)?.command)
}

/// Runs a validated configuration and returns the files written.
pub fn run(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    match cfg.command {
        Command::Predict => cmd_predict(cfg),
        Command::Fit => cmd_fit(cfg),
        Command::Evaluate => cmd_evaluate(cfg),
        Command::Sensitivity => cmd_sensitivity(cfg),
        Command::ExportPlotData => cmd_export_plot_data(cfg),
        Command::ListGames => cmd_list_games(cfg),
        Command::Synth => cmd_synth(cfg),
    }
}
