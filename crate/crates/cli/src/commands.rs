//! The commands, as library functions writing into the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use quantal_hierarchy::density::BandwidthRule;
use quantal_hierarchy::eval::{rank_models, report_csv, report_text, ErrorRow, RankTable, ReportCell};
use quantal_hierarchy::experiment::{Experiment, GameClass, GameKey};
use quantal_hierarchy::fitting::{
    cross_validate_in, fit_model_in, fitting_experiment, CVPlan, CVResult, FitResult, ModelEvaluator, SearchSpace,
};
use quantal_hierarchy::model::{ModelFamily, ModelSpec};
use quantal_hierarchy::observations::{ExperimentData, ObservationSet};
use quantal_hierarchy::qh::DEFAULT_EPSILON;
use quantal_hierarchy::scalar::mode;
use quantal_hierarchy::synthetic::synthesize_set;
use quantal_hierarchy::{heatmap_grid, Policy64};

use crate::config::RunConfig;
use crate::CliError;

pub const SENSITIVITY_SAMPLES: usize = 1000;
pub const SENSITIVITY_RANGE: (f64, f64) = (1e-9, 1e-7);
/// Echo thresholds drawn in the sensitivity overlay export.
pub const OVERLAY_EPSILONS: [f64; 3] = [1e-9, 1e-8, 1e-7];
pub const HEATMAP_BETAS: [f64; 10] = [0.0, 0.001, 0.003, 0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0];
pub const HEATMAP_GAME: &str = "ultimatum:0-50";
/// Models exported when neither `--model` nor data is given.
pub const ILLUSTRATIVE_MODELS: [&str; 6] = [
    "nash",
    "levelk:k=1",
    "levelk:k=2",
    "ch:tau=1.5",
    "qre:lambda=0.5",
    "qh:beta=1,gamma=0.5",
];

/// Prints to stdout, ignoring a closed pipe.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("cannot create output directory {}: {e}", dir.display())))
}

/// Writes `name` inside the output directory.
fn write_out(cfg: &RunConfig, name: &str, contents: &[u8]) -> Result<PathBuf, CliError> {
    ensure_dir(&cfg.output_dir)?;
    let path = cfg.output_dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

/// In-memory CSV table.
struct Table(csv::Writer<Vec<u8>>);

impl Table {
    fn new(header: &[&str]) -> Self {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).expect("in-memory write");
        Table(w)
    }

    fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.0.write_record(fields).expect("in-memory write");
    }

    fn into_bytes(self) -> Vec<u8> {
        self.0.into_inner().expect("in-memory flush")
    }
}

fn num(x: f64) -> String {
    format!("{x:.12}")
}

fn load_data(cfg: &RunConfig) -> Result<ObservationSet, CliError> {
    let path = cfg.data.as_ref().ok_or_else(|| CliError::Config("--data is required".into()))?;
    let set = ObservationSet::from_path(path)?;
    Ok(filter_games(set, &cfg.games))
}

/// Keeps the experiments named in `games` (all when empty).
fn filter_games(mut set: ObservationSet, games: &[GameKey]) -> ObservationSet {
    if !games.is_empty() {
        let wanted: Vec<GameKey> = games.iter().map(GameKey::experiment_key).collect();
        set.experiments.retain(|e| wanted.contains(&e.key));
    }
    set
}

fn space(cfg: &RunConfig) -> SearchSpace {
    SearchSpace {
        epsilon: cfg.epsilon.unwrap_or(DEFAULT_EPSILON),
        ..SearchSpace::default()
    }
}

/// Name of the cell dimension in prediction tables.
fn cell_role(key: GameKey) -> &'static str {
    match key.class() {
        GameClass::Market => "capacity",
        GameClass::Beauty => "guess",
        GameClass::Centipede => "outcome",
        GameClass::Bargaining => "request",
    }
}

// ---------------------------------------------------------------- predict

pub struct Prediction {
    pub key: GameKey,
    pub model: ModelSpec,
    pub labels: Vec<String>,
    pub values: Vec<f64>,
    pub policy: Option<Policy64>,
}

pub fn predict(key: GameKey, model: &ModelSpec) -> Result<Prediction, CliError> {
    let exp = Experiment::<f64>::build(key)?;
    let values = exp.predict(model)?;
    let policy = match exp.tree() {
        Some(_) => Some(exp.tree_policy(model)?),
        None => None,
    };
    Ok(Prediction {
        key,
        model: *model,
        labels: exp.outcome_labels(),
        values,
        policy,
    })
}

pub fn cmd_predict(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let p = predict(cfg.games[0], &cfg.models[0])?;
    let model = p.model.to_string();
    let game = p.key.to_string();
    let mut t = Table::new(&["game", "model", "cell", "choice", "probability"]);
    if p.key.class() == GameClass::Market {
        for (label, &e) in p.labels.iter().zip(&p.values) {
            t.row([game.as_str(), &model, label, "enter", &num(e)]);
            t.row([game.as_str(), &model, label, "stay", &num(1.0 - e)]);
        }
    } else {
        let role = cell_role(p.key);
        for (label, &v) in p.labels.iter().zip(&p.values) {
            t.row([game.as_str(), &model, role, label, &num(v)]);
        }
    }
    let mut written = vec![write_out(cfg, "prediction.csv", &t.into_bytes())?];

    if let Some(policy) = &p.policy {
        let exp = Experiment::<f64>::build(p.key)?;
        let tree = exp.tree().expect("tree game");
        let mut t = Table::new(&["node", "player", "depth", "action", "probability"]);
        for (i, (node, probs)) in tree.nodes().iter().zip(policy.as_slices()).enumerate() {
            for (a, pr) in node.actions.iter().zip(probs) {
                t.row([i.to_string(), node.player.to_string(), node.depth().to_string(), a.clone(), num(*pr)]);
            }
        }
        written.push(write_out(cfg, "policy.csv", &t.into_bytes())?);
    }

    say!("{game} under {model}");
    if p.key.class() == GameClass::Market {
        for (label, e) in p.labels.iter().zip(&p.values) {
            say!("  {label}: entry {e:.4}");
        }
    } else {
        let m = mode(&p.values);
        say!("  mode {} {} (probability {:.4})", cell_role(p.key), p.labels[m], p.values[m]);
    }
    Ok(written)
}

// -------------------------------------------------------------------- fit

/// Full-data fit of every family in `families` on every experiment.
pub fn fit_all(
    set: &ObservationSet,
    families: &[ModelFamily],
    rule: BandwidthRule,
    space: &SearchSpace,
    budget: usize,
    seed: u64,
) -> Result<Vec<(GameKey, FitResult)>, CliError> {
    let exps: Vec<Experiment<f64>> = set
        .experiments
        .iter()
        .map(fitting_experiment)
        .collect::<Result<_, _>>()?;
    let targets: Vec<Vec<f64>> = set
        .experiments
        .iter()
        .map(|d| d.target(&d.all_indices(), rule))
        .collect::<Result<_, _>>()?;
    let tasks = tasks(&exps, families)?;
    tasks
        .par_iter()
        .map(|&(e, fam)| {
            let ev = ModelEvaluator::new(&exps[e], fam)?;
            let fit = fit_model_in(&ev, space, &targets[e], budget, seed)?;
            Ok((exps[e].key, fit))
        })
        .collect()
}

/// `(experiment, family)` work units in report order. Families that do not
/// apply to a game are a configuration error.
fn tasks(exps: &[Experiment<f64>], families: &[ModelFamily]) -> Result<Vec<(usize, ModelFamily)>, CliError> {
    let mut out = Vec::with_capacity(exps.len() * families.len());
    for (e, exp) in exps.iter().enumerate() {
        for &fam in families {
            if !exp.supports(fam) {
                return Err(CliError::Config(format!("model family {fam} is not defined for {}", exp.key)));
            }
            out.push((e, fam));
        }
    }
    Ok(out)
}

pub fn cmd_fit(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let set = load_data(cfg)?;
    let fits = fit_all(&set, &cfg.families, cfg.bandwidth, &space(cfg), cfg.budget, cfg.seed)?;
    let mut t = Table::new(&["game", "model", "fitted", "train_rmse", "evaluations"]);
    for (key, fit) in &fits {
        t.row([
            key.to_string(),
            fit.spec.family().display_name().to_string(),
            fit.spec.to_string(),
            num(fit.train_mse.sqrt()),
            fit.evaluations.to_string(),
        ]);
        say!("{key}: {} (train rmse {:.5})", fit.spec, fit.train_mse.sqrt());
    }
    Ok(vec![write_out(cfg, "fit.csv", &t.into_bytes())?])
}

// --------------------------------------------------------------- evaluate

/// Cross-validated comparison of model families.
pub struct Evaluation {
    pub families: Vec<ModelFamily>,
    pub experiments: Vec<GameKey>,
    /// `results[e][m]` for experiment `e` and family `m`.
    pub results: Vec<Vec<CVResult>>,
    pub table: RankTable,
}

impl Evaluation {
    pub fn cells(&self) -> Vec<Vec<ReportCell>> {
        self.results
            .iter()
            .map(|row| {
                row.iter()
                    .map(|r| ReportCell {
                        rmse_mean: r.mean_rmse,
                        rmse_std: r.std_rmse,
                    })
                    .collect()
            })
            .collect()
    }

    pub fn report_csv(&self) -> String {
        report_csv(&self.table, &self.cells())
    }

    pub fn report_text(&self) -> String {
        report_text(&self.table, &self.cells())
    }

    pub fn folds_csv(&self) -> Vec<u8> {
        let mut t = Table::new(&["game", "model", "repeat", "fold", "fitted", "train_rmse", "test_rmse"]);
        for (key, row) in self.experiments.iter().zip(&self.results) {
            for (fam, res) in self.families.iter().zip(row) {
                for f in &res.fits {
                    t.row([
                        key.to_string(),
                        fam.display_name().to_string(),
                        f.repeat.to_string(),
                        f.fold.to_string(),
                        f.fit.spec.to_string(),
                        num(f.fit.train_mse.sqrt()),
                        num(f.test_rmse),
                    ]);
                }
            }
        }
        t.into_bytes()
    }
}

pub fn evaluate(
    set: &ObservationSet,
    families: &[ModelFamily],
    rule: BandwidthRule,
    space: &SearchSpace,
    budget: usize,
    seed: u64,
) -> Result<Evaluation, CliError> {
    if set.experiments.is_empty() {
        return Err(CliError::Data("no experiments to evaluate".into()));
    }
    let exps: Vec<Experiment<f64>> = set
        .experiments
        .iter()
        .map(fitting_experiment)
        .collect::<Result<_, _>>()?;
    let plan = CVPlan::new(seed);
    let work = tasks(&exps, families)?;
    let flat: Vec<CVResult> = work
        .par_iter()
        .map(|&(e, fam)| {
            let ev = ModelEvaluator::new(&exps[e], fam)?;
            log::info!("cross-validating {fam} on {}", exps[e].key);
            Ok(cross_validate_in(&ev, space, &set.experiments[e], &plan, rule, budget)?)
        })
        .collect::<Result<_, CliError>>()?;
    let results: Vec<Vec<CVResult>> = flat.chunks(families.len()).map(<[CVResult]>::to_vec).collect();
    let rows: Vec<ErrorRow> = set
        .experiments
        .iter()
        .zip(&results)
        .map(|(d, row)| {
            (
                d.key.class().label().to_string(),
                d.key.label(),
                row.iter().map(|r| r.mean_rmse).collect(),
            )
        })
        .collect();
    let names: Vec<String> = families.iter().map(|f| f.display_name().to_string()).collect();
    let table = rank_models(&names, &rows)?;
    Ok(Evaluation {
        families: families.to_vec(),
        experiments: set.experiments.iter().map(|d| d.key).collect(),
        results,
        table,
    })
}

pub fn cmd_evaluate(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let set = load_data(cfg)?;
    let ev = evaluate(&set, &cfg.families, cfg.bandwidth, &space(cfg), cfg.budget, cfg.seed)?;
    let text = ev.report_text();
    say!("{}", text.trim_end());
    Ok(vec![
        write_out(cfg, "report.csv", ev.report_csv().as_bytes())?,
        write_out(cfg, "report.txt", text.as_bytes())?,
        write_out(cfg, "folds.csv", &ev.folds_csv())?,
    ])
}

// ------------------------------------------------------------ sensitivity

pub struct Sweep {
    pub labels: Vec<String>,
    pub baseline: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub predictions: Vec<Vec<f64>>,
    /// Max elementwise deviation of each sample from the baseline.
    pub deviations: Vec<f64>,
}

impl Sweep {
    pub fn max_deviation(&self) -> f64 {
        self.deviations.iter().copied().fold(0.0, f64::max)
    }
}

/// Predictions of `model` for `n` seeded echo thresholds drawn uniformly in
/// [`SENSITIVITY_RANGE`], against the default threshold.
pub fn sensitivity_sweep(key: GameKey, model: &ModelSpec, n: usize, seed: u64) -> Result<Sweep, CliError> {
    let ModelSpec::QuantalHierarchy { beta, gamma, .. } = *model else {
        return Err(CliError::Config("the sweep needs a qh model".into()));
    };
    if !key.is_open_ended() {
        return Err(CliError::Config(format!("{key} has a defined end point")));
    }
    let exp = Experiment::<f64>::build(key)?;
    let at = |epsilon: f64| exp.predict(&ModelSpec::QuantalHierarchy { beta, gamma, epsilon });
    let baseline = at(DEFAULT_EPSILON)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Uniform::new_inclusive(SENSITIVITY_RANGE.0, SENSITIVITY_RANGE.1);
    let epsilons: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
    let predictions: Vec<Vec<f64>> = epsilons.par_iter().map(|&e| at(e)).collect::<Result<_, _>>()?;
    let deviations = predictions
        .iter()
        .map(|p| p.iter().zip(&baseline).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .collect();
    Ok(Sweep {
        labels: exp.outcome_labels(),
        baseline,
        epsilons,
        predictions,
        deviations,
    })
}

pub fn cmd_sensitivity(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let key = cfg.games[0];
    let model = match cfg.models.first() {
        Some(m) => *m,
        None => {
            let set = load_data(cfg)?;
            if set.experiments.is_empty() {
                return Err(CliError::Data(format!("no observations for {key} in the data file")));
            }
            let fits = fit_all(
                &set,
                &[ModelFamily::QuantalHierarchy],
                cfg.bandwidth,
                &space(cfg),
                cfg.budget,
                cfg.seed,
            )?;
            fits[0].1.spec
        }
    };
    let sweep = sensitivity_sweep(key, &model, SENSITIVITY_SAMPLES, cfg.seed)?;
    let mut summary = Table::new(&["sample", "epsilon", "max_deviation"]);
    let mut detail = Table::new(&["sample", "epsilon", "label", "prediction"]);
    for (label, v) in sweep.labels.iter().zip(&sweep.baseline) {
        detail.row(["baseline".to_string(), format!("{DEFAULT_EPSILON:e}"), label.clone(), num(*v)]);
    }
    for (i, ((e, p), d)) in sweep.epsilons.iter().zip(&sweep.predictions).zip(&sweep.deviations).enumerate() {
        summary.row([i.to_string(), format!("{e:e}"), format!("{d:e}")]);
        for (label, v) in sweep.labels.iter().zip(p) {
            detail.row([i.to_string(), format!("{e:e}"), label.clone(), num(*v)]);
        }
    }
    say!(
        "{key} under {model}: max deviation {:.3e} over {} thresholds in [{:e}, {:e}]",
        sweep.max_deviation(),
        sweep.epsilons.len(),
        SENSITIVITY_RANGE.0,
        SENSITIVITY_RANGE.1
    );
    Ok(vec![
        write_out(cfg, "sensitivity.csv", &summary.into_bytes())?,
        write_out(cfg, "sensitivity_predictions.csv", &detail.into_bytes())?,
    ])
}

// ------------------------------------------------------- export-plot-data

fn models_for_export(
    cfg: &RunConfig,
    key: GameKey,
    data: Option<&ExperimentData>,
) -> Result<Vec<ModelSpec>, CliError> {
    if !cfg.models.is_empty() {
        return Ok(cfg.models.clone());
    }
    let exp = Experiment::<f64>::build(key)?;
    if let Some(d) = data {
        let fams: Vec<ModelFamily> = cfg.families.iter().copied().filter(|f| exp.supports(*f)).collect();
        let set = ObservationSet {
            experiments: vec![d.clone()],
        };
        let fits = fit_all(&set, &fams, cfg.bandwidth, &space(cfg), cfg.budget, cfg.seed)?;
        return Ok(fits.into_iter().map(|(_, f)| f.spec).collect());
    }
    Ok(ILLUSTRATIVE_MODELS
        .iter()
        .map(|m| crate::config::with_epsilon(m.parse().expect("valid built-in model"), cfg.epsilon))
        .filter(|m| exp.supports(m.family()))
        .collect())
}

pub fn cmd_export_plot_data(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let set = match &cfg.data {
        Some(_) => Some(load_data(cfg)?),
        None => None,
    };
    let games: Vec<GameKey> = if cfg.games.is_empty() {
        set.iter().flat_map(|s| s.experiments.iter().map(|d| d.key)).collect()
    } else {
        cfg.games.clone()
    };
    let mut series = Table::new(&["game", "model", "index", "label", "prediction", "observed"]);
    let mut meta = Table::new(&["game", "key", "value"]);
    let mut overlay = Table::new(&["game", "model", "epsilon", "index", "label", "prediction"]);
    for key in &games {
        let data = set
            .as_ref()
            .and_then(|s| s.experiments.iter().find(|d| d.key == key.experiment_key()));
        let exp = match data {
            Some(d) => Experiment::<f64>::build_with_capacities(d.key, &d.capacities)?,
            None => Experiment::<f64>::build(*key)?,
        };
        let observed = match data {
            Some(d) => Some(d.target(&d.all_indices(), cfg.bandwidth)?),
            None => None,
        };
        let labels = exp.outcome_labels();
        let game = key.to_string();
        for model in models_for_export(cfg, *key, data)? {
            let pred = exp.predict(&model)?;
            let name = model.to_string();
            for (i, (label, p)) in labels.iter().zip(&pred).enumerate() {
                let obs = observed.as_ref().map_or(String::new(), |o| num(o[i]));
                series.row([game.clone(), name.clone(), i.to_string(), label.clone(), num(*p), obs]);
            }
            meta.row([game.clone(), "model".to_string(), name.clone()]);
            if key.is_open_ended() && model.family() == ModelFamily::QuantalHierarchy {
                let ModelSpec::QuantalHierarchy { beta, gamma, .. } = model else {
                    unreachable!()
                };
                for epsilon in OVERLAY_EPSILONS {
                    let p = exp.predict(&ModelSpec::QuantalHierarchy { beta, gamma, epsilon })?;
                    for (i, (label, v)) in labels.iter().zip(&p).enumerate() {
                        overlay.row([game.clone(), name.clone(), format!("{epsilon:e}"), i.to_string(), label.clone(), num(*v)]);
                    }
                }
            }
        }
        let nash = exp.predict(&ModelSpec::Nash)?;
        match key.class() {
            GameClass::Market => {
                for (label, p) in labels.iter().zip(&nash) {
                    meta.row([game.clone(), format!("nash_entry_{label}"), num(*p)]);
                }
            }
            _ => meta.row([game.clone(), "nash_mode".to_string(), labels[mode(&nash)].clone()]),
        }
    }

    let heat_key: GameKey = games
        .iter()
        .copied()
        .find(|k| !k.is_open_ended())
        .unwrap_or_else(|| HEATMAP_GAME.parse().expect("valid built-in key"));
    let heat_exp = Experiment::<f64>::build(heat_key)?;
    let tree = heat_exp.tree().expect("tree game");
    let gammas: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let mut heat = Table::new(&["game", "adversarial", "beta", "gamma", "payoff"]);
    for adversarial in [false, true] {
        let grid = heatmap_grid(tree, &HEATMAP_BETAS, &gammas, adversarial)?;
        for (b, row) in HEATMAP_BETAS.iter().zip(&grid) {
            for (g, v) in gammas.iter().zip(row) {
                heat.row([heat_key.to_string(), adversarial.to_string(), b.to_string(), g.to_string(), num(*v)]);
            }
        }
    }

    say!("exported {} games to {}", games.len(), cfg.output_dir.display());
    Ok(vec![
        write_out(cfg, "series.csv", &series.into_bytes())?,
        write_out(cfg, "metadata.csv", &meta.into_bytes())?,
        write_out(cfg, "sensitivity_overlay.csv", &overlay.into_bytes())?,
        write_out(cfg, "heatmap.csv", &heat.into_bytes())?,
    ])
}

// ------------------------------------------------------------------ synth

pub fn cmd_synth(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let pairs: Vec<(GameKey, ModelSpec)> = cfg.games.iter().copied().zip(cfg.models.iter().copied()).collect();
    let set = synthesize_set(&pairs, cfg.units, cfg.seed)?;
    let mut buf = Vec::new();
    set.write_csv(&mut buf)?;
    let path = write_out(cfg, "observations.csv", &buf)?;
    say!("wrote {} experiments to {}", set.experiments.len(), path.display());
    Ok(vec![path])
}

// ------------------------------------------------------------- list-games

pub fn list_games_text() -> String {
    let mut s = String::from("Game keys:\n");
    for line in GameKey::help_lines() {
        s.push_str(&format!("  {line}\n"));
    }
    s.push_str("\nPublished experiments:\n");
    for key in GameKey::catalogue() {
        s.push_str(&format!("  {key:<18} {}\n", key.label()));
    }
    s.push_str("\nModel families:\n");
    for fam in ModelFamily::ALL {
        s.push_str(&format!("  {:<36} {}\n", fam.usage(), fam.display_name()));
    }
    s
}

pub fn cmd_list_games(_cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    say!("{}", list_games_text().trim_end());
    Ok(Vec::new())
}
