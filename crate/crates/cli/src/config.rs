//! Validated run configuration.

use std::path::PathBuf;

use quantal_hierarchy::density::BandwidthRule;
use quantal_hierarchy::experiment::GameKey;
use quantal_hierarchy::fitting::DEFAULT_BUDGET;
use quantal_hierarchy::model::{ModelFamily, ModelSpec};
use quantal_hierarchy::QHParams;

use crate::CliError;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "QH_OUTPUT_DIR";
/// Output directory used when neither `--out` nor the variable is set.
pub const DEFAULT_OUTPUT_DIR: &str = "qh-out";
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_UNITS: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Predict,
    Fit,
    Evaluate,
    Sensitivity,
    ExportPlotData,
    ListGames,
    Synth,
}

/// Arguments as typed, before validation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawConfig {
    pub games: Vec<String>,
    pub models: Vec<String>,
    pub families: Option<String>,
    pub data: Option<PathBuf>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub bandwidth: Option<String>,
    pub epsilon: Option<f64>,
    pub budget: Option<usize>,
    pub units: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub games: Vec<GameKey>,
    /// Fully parameterized models (predict, sensitivity, export, synth).
    pub models: Vec<ModelSpec>,
    /// Families to fit (fit, evaluate, export with data).
    pub families: Vec<ModelFamily>,
    pub data: Option<PathBuf>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub bandwidth: BandwidthRule,
    /// Echo threshold replacing the QH default everywhere.
    pub epsilon: Option<f64>,
    pub budget: usize,
    pub units: usize,
}

impl RunConfig {
    /// Parses and checks everything that can be checked without solving a
    /// game. `env_output_dir` is the value of [`OUTPUT_DIR_ENV`], if set.
    pub fn from_raw(command: Command, raw: RawConfig, env_output_dir: Option<String>) -> Result<Self, CliError> {
        let games = raw
            .games
            .iter()
            .map(|g| g.parse::<GameKey>().map_err(|e| CliError::Config(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        let epsilon = match raw.epsilon {
            Some(e) if !(e.is_finite() && e > 0.0) => {
                return Err(CliError::Config(format!("--epsilon must be a positive number, got {e}")))
            }
            e => e,
        };
        let models = raw
            .models
            .iter()
            .map(|m| {
                m.parse::<ModelSpec>()
                    .map(|spec| with_epsilon(spec, epsilon))
                    .map_err(|e| CliError::Config(format!("model '{m}': {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let families = match &raw.families {
            None => ModelFamily::default_comparison().to_vec(),
            Some(list) => {
                let mut out = Vec::new();
                for f in list.split(',') {
                    let fam: ModelFamily = f.parse().map_err(|e| CliError::Config(format!("{e}")))?;
                    if out.contains(&fam) {
                        return Err(CliError::Config(format!("model family '{fam}' listed twice")));
                    }
                    out.push(fam);
                }
                out
            }
        };
        let bandwidth = match &raw.bandwidth {
            None => BandwidthRule::default(),
            Some(b) => b.parse().map_err(|e| CliError::Config(format!("{e}")))?,
        };
        let output_dir = raw
            .output_dir
            .or_else(|| env_output_dir.filter(|s| !s.is_empty()).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
        let budget = raw.budget.unwrap_or(DEFAULT_BUDGET);
        if budget == 0 {
            return Err(CliError::Config("--budget must be at least 1".into()));
        }
        let units = raw.units.unwrap_or(DEFAULT_UNITS);
        if units < 2 {
            return Err(CliError::Config("--units must be at least 2".into()));
        }
        for m in &models {
            validate_spec(m)?;
        }
        let cfg = RunConfig {
            command,
            games,
            models,
            families,
            data: raw.data,
            seed: raw.seed.unwrap_or(DEFAULT_SEED),
            output_dir,
            bandwidth,
            epsilon,
            budget,
            units,
        };
        cfg.check()?;
        Ok(cfg)
    }

    /// Per-command requirements.
    fn check(&self) -> Result<(), CliError> {
        let need = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(CliError::Config(msg.to_string())) };
        match self.command {
            Command::Predict => {
                need(self.games.len() == 1, "predict needs exactly one --game")?;
                need(self.models.len() == 1, "predict needs exactly one --model")?;
                self.check_supported()
            }
            Command::Fit | Command::Evaluate => need(self.data.is_some(), "this command needs --data"),
            Command::Sensitivity => {
                need(self.games.len() == 1, "sensitivity needs exactly one --game")?;
                let key = self.games[0];
                if !key.is_open_ended() {
                    return Err(CliError::Config(format!(
                        "{key} has a defined end point; the epsilon sweep only applies to market and beauty games"
                    )));
                }
                need(
                    self.models.len() == 1 || (self.models.is_empty() && self.data.is_some()),
                    "sensitivity needs one qh --model, or --data to fit one",
                )?;
                if let Some(m) = self.models.first() {
                    need(
                        m.family() == ModelFamily::QuantalHierarchy,
                        "sensitivity sweeps the qh echo threshold; pass a qh model",
                    )?;
                }
                Ok(())
            }
            Command::ExportPlotData => {
                need(
                    !self.games.is_empty() || self.data.is_some(),
                    "export-plot-data needs --game or --data",
                )?;
                self.check_supported()
            }
            Command::Synth => {
                need(!self.games.is_empty(), "synth needs at least one --game")?;
                need(
                    self.games.len() == self.models.len(),
                    "synth pairs every --game with one --model, in order",
                )?;
                for (g, m) in self.games.iter().zip(&self.models) {
                    supported(*g, m)?;
                }
                Ok(())
            }
            Command::ListGames => Ok(()),
        }
    }

    fn check_supported(&self) -> Result<(), CliError> {
        for g in &self.games {
            for m in &self.models {
                supported(*g, m)?;
            }
        }
        Ok(())
    }
}

/// Range checks on model parameters.
fn validate_spec(model: &ModelSpec) -> Result<(), CliError> {
    let bad = |msg: String| Err(CliError::Config(format!("model {model}: {msg}")));
    match *model {
        ModelSpec::QuantalHierarchy { beta, gamma, epsilon } => {
            if let Err(e) = QHParams::new(beta, gamma).and_then(|p| p.with_epsilon(epsilon)) {
                return bad(e.to_string());
            }
        }
        ModelSpec::QRE { lambda } | ModelSpec::AgentQRE { lambda } if !(lambda.is_finite() && lambda >= 0.0) => {
            return bad(format!("lambda must be finite and >= 0, got {lambda}"));
        }
        ModelSpec::CognitiveHierarchy { tau } if !(tau.is_finite() && tau >= 0.0) => {
            return bad(format!("tau must be finite and >= 0, got {tau}"));
        }
        _ => {}
    }
    Ok(())
}

fn supported(key: GameKey, model: &ModelSpec) -> Result<(), CliError> {
    let tree = !key.is_open_ended();
    if model.family() == ModelFamily::AgentQRE && !tree {
        return Err(CliError::Config(format!("model {model} is only defined on tree games, not {key}")));
    }
    Ok(())
}

/// Applies an echo-threshold override to QH models.
pub fn with_epsilon(spec: ModelSpec, epsilon: Option<f64>) -> ModelSpec {
    match (spec, epsilon) {
        (ModelSpec::QuantalHierarchy { beta, gamma, .. }, Some(epsilon)) => {
            ModelSpec::QuantalHierarchy { beta, gamma, epsilon }
        }
        (s, _) => s,
    }
}
