//! Parameter search and repeated two-fold cross-validation.
//!
//! Continuous parameters are searched by a seeded adaptive sampler on the
//! unit cube: a random exploration phase, then Gaussian proposals around the
//! best points found so far with a shrinking radius, plus occasional global
//! draws. Level-k is searched exhaustively over `k = 0..=100`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::density::BandwidthRule;
use crate::eval::{mse, rmse, EvalError};
use crate::experiment::{Experiment, PredictError};
use crate::model::{ModelFamily, ModelSpec};
use crate::observations::{DataError, ExperimentData};

/// Largest level searched by the level-k fit.
pub const MAX_LEVEL: usize = 100;
/// Reasoning depth cap for simultaneous games during fitting, so that
/// `gamma` close to 1 stays tractable.
pub const FIT_DEPTH_CAP: usize = 10_000;
pub const DEFAULT_BUDGET: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("no training observations")]
    EmptyObservations,
    #[error("model evaluation failed at {spec}: {source}")]
    ModelEvaluationFailure {
        spec: String,
        #[source]
        source: PredictError,
    },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("budget must be at least 1")]
    ZeroBudget,
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Search bounds of each family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchSpace {
    pub beta_max: f64,
    pub lambda_max: f64,
    pub tau_max: f64,
    pub max_level: usize,
    /// Echo threshold given to every QH candidate.
    pub epsilon: f64,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            beta_max: 100.0,
            lambda_max: 100.0,
            tau_max: 10.0,
            max_level: MAX_LEVEL,
            epsilon: crate::qh::DEFAULT_EPSILON,
        }
    }
}

impl SearchSpace {
    fn dims(family: ModelFamily) -> usize {
        match family {
            ModelFamily::QuantalHierarchy => 2,
            ModelFamily::QRE | ModelFamily::AgentQRE | ModelFamily::CognitiveHierarchy => 1,
            ModelFamily::LevelK | ModelFamily::Nash => 0,
        }
    }

    /// Maps a point of `[0, 1)^d` to parameters. Scale parameters are
    /// spread polynomially so small values get proportionate coverage.
    pub fn decode(&self, family: ModelFamily, u: &[f64]) -> ModelSpec {
        match family {
            ModelFamily::QuantalHierarchy => ModelSpec::QuantalHierarchy {
                beta: self.beta_max * u[0].powi(3),
                gamma: u[1],
                epsilon: self.epsilon,
            },
            ModelFamily::QRE => ModelSpec::QRE {
                lambda: self.lambda_max * u[0].powi(3),
            },
            ModelFamily::AgentQRE => ModelSpec::AgentQRE {
                lambda: self.lambda_max * u[0].powi(3),
            },
            ModelFamily::CognitiveHierarchy => ModelSpec::CognitiveHierarchy {
                tau: self.tau_max * u[0].powi(2),
            },
            ModelFamily::LevelK => ModelSpec::LevelK { k: 0 },
            ModelFamily::Nash => ModelSpec::Nash,
        }
    }
}

/// Predicts one family on one experiment, caching what can be shared
/// across parameter points.
pub struct ModelEvaluator<'a> {
    experiment: &'a Experiment<f64>,
    family: ModelFamily,
    level_cache: Option<Vec<Vec<f64>>>,
}

impl<'a> ModelEvaluator<'a> {
    pub fn new(experiment: &'a Experiment<f64>, family: ModelFamily) -> Result<Self, FitError> {
        if !experiment.supports(family) {
            return Err(PredictError::Unsupported {
                model: family.to_string(),
                game: experiment.key.to_string(),
            }
            .into());
        }
        let level_cache = if family == ModelFamily::LevelK {
            Some(experiment.level_k_predictions(MAX_LEVEL)?)
        } else {
            None
        };
        Ok(ModelEvaluator {
            experiment,
            family,
            level_cache,
        })
    }

    pub fn family(&self) -> ModelFamily {
        self.family
    }

    pub fn predict(&self, spec: &ModelSpec) -> Result<Vec<f64>, FitError> {
        if let (Some(cache), ModelSpec::LevelK { k }) = (&self.level_cache, spec) {
            if let Some(p) = cache.get(*k) {
                return Ok(p.clone());
            }
        }
        self.experiment
            .predict(spec)
            .map_err(|source| FitError::ModelEvaluationFailure {
                spec: spec.to_string(),
                source,
            })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub spec: ModelSpec,
    pub train_mse: f64,
    pub evaluations: usize,
}

/// Minimizes the MSE between predictions and `train` within `budget`
/// evaluations (level-k always uses its 101 levels, Nash a single one).
pub fn fit_model(
    evaluator: &ModelEvaluator<'_>,
    train: &[f64],
    budget: usize,
    seed: u64,
) -> Result<FitResult, FitError> {
    fit_model_in(evaluator, &SearchSpace::default(), train, budget, seed)
}

pub fn fit_model_in(
    evaluator: &ModelEvaluator<'_>,
    space: &SearchSpace,
    train: &[f64],
    budget: usize,
    seed: u64,
) -> Result<FitResult, FitError> {
    if train.is_empty() {
        return Err(FitError::EmptyObservations);
    }
    if budget == 0 {
        return Err(FitError::ZeroBudget);
    }
    let family = evaluator.family();
    let loss = |spec: &ModelSpec| -> Result<f64, FitError> {
        let pred = evaluator.predict(spec)?;
        Ok(mse(&pred, train)?)
    };
    match family {
        ModelFamily::Nash => Ok(FitResult {
            spec: ModelSpec::Nash,
            train_mse: loss(&ModelSpec::Nash)?,
            evaluations: 1,
        }),
        ModelFamily::LevelK => {
            let mut best = (f64::INFINITY, 0);
            for k in 0..=space.max_level {
                let l = loss(&ModelSpec::LevelK { k })?;
                // strict improvement keeps the lowest level on ties
                if l < best.0 {
                    best = (l, k);
                }
            }
            Ok(FitResult {
                spec: ModelSpec::LevelK { k: best.1 },
                train_mse: best.0,
                evaluations: space.max_level + 1,
            })
        }
        _ => {
            let dims = SearchSpace::dims(family);
            let (u, l, n) = adaptive_search(dims, budget, seed, |u| loss(&space.decode(family, u)))?;
            Ok(FitResult {
                spec: space.decode(family, &u),
                train_mse: l,
                evaluations: n,
            })
        }
    }
}

const UNIT_MAX: f64 = 1.0 - 1e-12;

/// Seeded minimization over `[0, 1)^dims` using exactly `budget`
/// evaluations. Returns the best point, its loss and the count.
pub fn adaptive_search<E>(
    dims: usize,
    budget: usize,
    seed: u64,
    mut objective: impl FnMut(&[f64]) -> Result<f64, E>,
) -> Result<(Vec<f64>, f64, usize), E> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen: Vec<(f64, Vec<f64>)> = Vec::with_capacity(budget);
    let explore = (budget / 4).max(1).min(budget);
    for _ in 0..explore {
        let u: Vec<f64> = (0..dims).map(|_| rng.gen::<f64>()).collect();
        let l = objective(&u)?;
        seen.push((sanitize(l), u));
    }
    let refine = budget - explore;
    for i in 0..refine {
        let progress = i as f64 / refine.max(1) as f64;
        let u: Vec<f64> = if rng.gen::<f64>() < 0.1 {
            (0..dims).map(|_| rng.gen::<f64>()).collect()
        } else {
            seen.sort_by(|a, b| a.0.total_cmp(&b.0));
            let pick = if rng.gen::<f64>() < 0.7 { 0 } else { rng.gen_range(0..seen.len().min(5)) };
            let radius = 0.15 * (0.002f64 / 0.15).powf(progress);
            seen[pick]
                .1
                .iter()
                .map(|&x| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    reflect(x + radius * z)
                })
                .collect()
        };
        let l = objective(&u)?;
        seen.push((sanitize(l), u));
    }
    let (l, u) = seen
        .into_iter()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .expect("budget >= 1");
    Ok((u, l, budget))
}

fn sanitize(l: f64) -> f64 {
    if l.is_nan() {
        f64::INFINITY
    } else {
        l
    }
}

fn reflect(x: f64) -> f64 {
    let mut y = x;
    if y < 0.0 {
        y = -y;
    }
    if y > UNIT_MAX {
        y = 2.0 * UNIT_MAX - y;
    }
    y.clamp(0.0, UNIT_MAX)
}

/// Cross-validation layout: `repeats` random halvings of the data.
#[derive(Clone, Debug, PartialEq)]
pub struct CVPlan {
    pub repeats: usize,
    pub folds: usize,
    pub seed: u64,
    /// Explicit fold (0 or 1) of every unit per repeat; drawn from `seed`
    /// when absent.
    pub assignments: Option<Vec<Vec<u8>>>,
}

impl CVPlan {
    pub fn new(seed: u64) -> Self {
        CVPlan {
            repeats: 5,
            folds: 2,
            seed,
            assignments: None,
        }
    }

    /// Fold of every unit for each repeat. Units are split within each cell
    /// so both halves see every cell.
    pub fn split(&self, data: &ExperimentData) -> Result<Vec<Vec<u8>>, FitError> {
        if self.folds != 2 {
            return Err(FitError::InsufficientData("only two-fold splits are supported".into()));
        }
        let n = data.units.len();
        if n < 4 {
            return Err(FitError::InsufficientData(format!(
                "{}: cross-validation needs at least 4 observations, got {n}",
                data.key
            )));
        }
        if let Some(a) = &self.assignments {
            if a.len() != self.repeats || a.iter().any(|r| r.len() != n || r.iter().any(|&f| f > 1)) {
                return Err(FitError::InsufficientData(
                    "explicit fold assignments do not match the data".into(),
                ));
            }
            return Ok(a.clone());
        }
        let mut cells: Vec<Vec<usize>> = vec![Vec::new(); data.n_cells()];
        for (i, u) in data.units.iter().enumerate() {
            cells[u.cell].push(i);
        }
        if let Some(c) = cells.iter().position(|c| c.len() < 2) {
            return Err(FitError::InsufficientData(format!(
                "{}: every cell needs at least 2 observations (cell {c})",
                data.key
            )));
        }
        Ok((0..self.repeats)
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(r as u64 + 1);
                let mut fold = vec![0u8; n];
                for cell in &cells {
                    let mut idx = cell.clone();
                    for i in (1..idx.len()).rev() {
                        let j = rng.gen_range(0..=i);
                        idx.swap(i, j);
                    }
                    // odd leftovers alternate between halves
                    let half = idx.len() / 2 + (idx.len() % 2) * rng.gen_range(0..=1);
                    for &i in &idx[half..] {
                        fold[i] = 1;
                    }
                }
                fold
            })
            .collect())
    }

    /// Seed of the search for a repeat; both folds of a repeat share it.
    pub fn fit_seed(&self, repeat: usize) -> u64 {
        self.seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add((repeat as u64 + 1).wrapping_mul(0xD1B5_4A32_D192_ED03))
    }
}

/// Experiment matching `data` (market capacities included), with the
/// fitting depth cap applied.
pub fn fitting_experiment(data: &ExperimentData) -> Result<Experiment<f64>, FitError> {
    Ok(Experiment::build_with_capacities(data.key, &data.capacities)?.with_level_depth_cap(Some(FIT_DEPTH_CAP)))
}

/// One train/test fit.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldFit {
    pub repeat: usize,
    pub fold: usize,
    pub fit: FitResult,
    pub test_rmse: f64,
    /// Fitted prediction, for inspection.
    pub prediction: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CVResult {
    pub fits: Vec<FoldFit>,
    pub mean_rmse: f64,
    pub std_rmse: f64,
}

impl CVResult {
    /// Mean of each fitted parameter over the fits.
    pub fn mean_params(&self) -> Vec<f64> {
        let n = self.fits.len() as f64;
        let width = self.fits.first().map_or(0, |f| f.fit.spec.values().len());
        (0..width)
            .map(|i| self.fits.iter().map(|f| f.fit.spec.values()[i]).sum::<f64>() / n)
            .collect()
    }
}

/// Fits on each half and scores on the other, for every repeat. Smoothed
/// targets are built independently for each half.
pub fn cross_validate(
    evaluator: &ModelEvaluator<'_>,
    data: &ExperimentData,
    plan: &CVPlan,
    rule: BandwidthRule,
    budget: usize,
) -> Result<CVResult, FitError> {
    cross_validate_in(evaluator, &SearchSpace::default(), data, plan, rule, budget)
}

pub fn cross_validate_in(
    evaluator: &ModelEvaluator<'_>,
    space: &SearchSpace,
    data: &ExperimentData,
    plan: &CVPlan,
    rule: BandwidthRule,
    budget: usize,
) -> Result<CVResult, FitError> {
    let splits = plan.split(data)?;
    let mut fits = Vec::with_capacity(splits.len() * 2);
    for (r, fold_of) in splits.iter().enumerate() {
        let halves: [Vec<usize>; 2] = [0u8, 1].map(|f| (0..fold_of.len()).filter(|&i| fold_of[i] == f).collect());
        let targets = [data.target(&halves[0], rule)?, data.target(&halves[1], rule)?];
        let seed = plan.fit_seed(r);
        for fold in 0..2 {
            let fit = fit_model_in(evaluator, space, &targets[fold], budget, seed)?;
            let prediction = evaluator.predict(&fit.spec)?;
            let test_rmse = rmse(&prediction, &targets[1 - fold])?;
            fits.push(FoldFit {
                repeat: r,
                fold,
                fit,
                test_rmse,
                prediction,
            });
        }
    }
    let n = fits.len() as f64;
    let mean = fits.iter().map(|f| f.test_rmse).sum::<f64>() / n;
    let var = if fits.len() > 1 {
        fits.iter().map(|f| (f.test_rmse - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(CVResult {
        fits,
        mean_rmse: mean,
        std_rmse: var.sqrt(),
    })
}
