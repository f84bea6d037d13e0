//! The Quantal Hierarchy recursion.
//!
//! A node at depth `k` (root = 0) gets reasoning resource `beta_k = beta *
//! gamma^k`. Once `|beta_k| < epsilon` the node simply plays its prior. Above
//! that, the node plays a logit rule `f ∝ prior * exp(beta_k * Q)` where the
//! future term comes from the deeper, less-resourced levels.
//!
//! Two backups are available. [`Backup::Expected`] (the default) values each
//! action by the acting player's expected payoff under the deeper policies.
//! [`Backup::FreeEnergy`] uses the partition-function backup literally: the
//! future term is `(1/gamma) * ln Z_{k+1}` and only payoffs reached directly
//! by the action enter `U`.

use thiserror::Error;

use crate::game_tree::{Child, GameTree, Policy, TreeError};
use crate::games::LevelGame;
use crate::scalar::{log_sum_exp, normalize_log_weights, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QHError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("non-finite backup at node {node}")]
    NonFiniteBackup { node: usize },
    #[error("reasoning depth is unbounded (gamma = 1, beta > 0 and no depth cap)")]
    UnboundedDepth,
    #[error("utilities and prior differ in length ({utilities} vs {prior})")]
    LengthMismatch { utilities: usize, prior: usize },
    #[error("non-finite utility")]
    NonFiniteUtility,
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// Model parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QHParams<T> {
    pub beta: T,
    pub gamma: T,
    pub epsilon: T,
    /// Permits `beta < 0` (anti-rational play).
    pub adversarial: bool,
}

pub const DEFAULT_EPSILON: f64 = 1e-8;

impl<T: Scalar> QHParams<T> {
    pub fn new(beta: T, gamma: T) -> Result<Self, QHError> {
        let p = QHParams {
            beta,
            gamma,
            epsilon: T::lit(DEFAULT_EPSILON),
            adversarial: false,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_epsilon(mut self, epsilon: T) -> Result<Self, QHError> {
        self.epsilon = epsilon;
        self.validate()?;
        Ok(self)
    }

    pub fn adversarial(beta: T, gamma: T) -> Result<Self, QHError> {
        let p = QHParams {
            beta,
            gamma,
            epsilon: T::lit(DEFAULT_EPSILON),
            adversarial: true,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), QHError> {
        if !self.beta.is_finite() {
            return Err(QHError::InvalidParams(format!("beta must be finite, got {}", self.beta)));
        }
        if self.beta < T::zero() && !self.adversarial {
            return Err(QHError::InvalidParams(format!(
                "beta must be >= 0 unless adversarial play is enabled, got {}",
                self.beta
            )));
        }
        if !(self.gamma >= T::zero() && self.gamma <= T::one()) {
            return Err(QHError::InvalidParams(format!("gamma must lie in [0, 1], got {}", self.gamma)));
        }
        let lo = T::lit(1e-12) * (T::one() - T::lit(1e-9));
        let hi = T::lit(1e-4) * (T::one() + T::lit(1e-9));
        if !(self.epsilon >= lo && self.epsilon <= hi) {
            return Err(QHError::InvalidParams(format!(
                "epsilon must lie in [1e-12, 1e-4], got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    /// `beta * gamma^k`.
    pub fn level_resource(&self, k: usize) -> T {
        if k == 0 {
            return self.beta;
        }
        let k = i32::try_from(k).unwrap_or(i32::MAX);
        self.beta * self.gamma.powi(k)
    }

    /// Whether depth `k` has run out of resources and echoes its prior.
    pub fn echoes(&self, k: usize) -> bool {
        self.level_resource(k).abs() < self.epsilon
    }

    /// Per-depth resources `beta_0 .. beta_{K-1}` down to the echo depth.
    pub fn resources(&self, cap: Option<usize>) -> Result<LevelResources<T>, QHError> {
        let k = effective_depth(self, cap)?;
        Ok(LevelResources((0..k).map(|d| self.level_resource(d)).collect()))
    }
}

/// Per-depth effective resources `beta_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelResources<T>(pub Vec<T>);

/// Backup rule used by [`solve_qh_with`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Backup {
    #[default]
    Expected,
    FreeEnergy,
}

/// Solver output.
#[derive(Clone, Debug, PartialEq)]
pub struct QHSolution<T> {
    pub policy: Policy<T>,
    /// `ln Z_k` per node; zero (Z = 1) where the node echoes its prior.
    pub log_z: Vec<T>,
}

/// Logit response `f[a] ∝ prior[a] * exp(beta * U[a])`.
pub fn single_step_decision<T: Scalar>(utilities: &[T], prior: &[T], beta: T) -> Result<Vec<T>, QHError> {
    let (f, _) = logit_with_log_z(utilities, prior, beta)?;
    Ok(f)
}

fn logit_with_log_z<T: Scalar>(utilities: &[T], prior: &[T], beta: T) -> Result<(Vec<T>, T), QHError> {
    if utilities.len() != prior.len() {
        return Err(QHError::LengthMismatch {
            utilities: utilities.len(),
            prior: prior.len(),
        });
    }
    if utilities.iter().any(|u| !u.is_finite()) {
        return Err(QHError::NonFiniteUtility);
    }
    let mut scores: Vec<T> = utilities
        .iter()
        .zip(prior)
        .map(|(&u, &p)| if p > T::zero() { p.ln() + beta * u } else { T::neg_infinity() })
        .collect();
    let log_z = normalize_log_weights(&mut scores);
    Ok((scores, log_z))
}

/// Smallest `k` with `beta * gamma^k < epsilon`, limited by `cap`.
///
/// `gamma = 0` gives 1 and `beta = 0` gives 0. With `gamma = 1` the depth is
/// only finite through `cap`.
pub fn effective_depth<T: Scalar>(params: &QHParams<T>, cap: Option<usize>) -> Result<usize, QHError> {
    let limit = |k: usize| cap.map_or(k, |c| k.min(c));
    if params.echoes(0) {
        return Ok(0);
    }
    if params.gamma == T::zero() {
        return Ok(limit(1));
    }
    if params.gamma >= T::one() {
        return cap.ok_or(QHError::UnboundedDepth);
    }
    let beta = params.beta.abs().as_f64();
    let gamma = params.gamma.as_f64();
    let eps = params.epsilon.as_f64();
    let mut k = 1usize;
    let mut b = beta * gamma;
    while b >= eps {
        if cap.is_some_and(|c| k >= c) {
            return Ok(limit(k));
        }
        k += 1;
        b *= gamma;
    }
    Ok(limit(k))
}

/// Effective depth on a finite tree: the tree height (or its depth cap)
/// bounds the recursion.
pub fn tree_effective_depth<T: Scalar>(tree: &GameTree<T>, params: &QHParams<T>) -> Result<usize, QHError> {
    let cap = tree.depth_cap().map_or(tree.height(), |c| c.min(tree.height()));
    effective_depth(params, Some(cap))
}

/// Solves `tree` with the default expected-payoff backup.
pub fn solve_qh<T: Scalar>(tree: &GameTree<T>, params: &QHParams<T>) -> Result<QHSolution<T>, QHError> {
    solve_qh_with(tree, params, Backup::Expected)
}

pub fn solve_qh_with<T: Scalar>(
    tree: &GameTree<T>,
    params: &QHParams<T>,
    backup: Backup,
) -> Result<QHSolution<T>, QHError> {
    params.validate()?;
    match backup {
        Backup::Expected => solve_expected(tree, params),
        Backup::FreeEnergy => solve_free_energy(tree, params),
    }
}

fn is_base<T: Scalar>(tree: &GameTree<T>, params: &QHParams<T>, depth: usize) -> bool {
    params.echoes(depth) || tree.depth_cap().is_some_and(|c| depth >= c)
}

fn solve_expected<T: Scalar>(tree: &GameTree<T>, params: &QHParams<T>) -> Result<QHSolution<T>, QHError> {
    let n = tree.len();
    let players = tree.players();
    let mut probs: Vec<Vec<T>> = vec![Vec::new(); n];
    let mut log_z = vec![T::zero(); n];
    // values[i * players + p]: expected payoff of p from node i on
    let mut values = vec![T::zero(); n * players];
    let mut own: Vec<T> = Vec::new();
    let mut v = vec![T::zero(); players];
    for i in (0..n).rev() {
        let node = &tree.nodes()[i];
        fn row<'a, T>(c: &'a Child<T>, values: &'a [T], players: usize) -> &'a [T] {
            match c {
                Child::Terminal(p) => p,
                Child::Node(k) => &values[k.0 * players..(k.0 + 1) * players],
            }
        }
        own.clear();
        own.extend(
            node.children
                .iter()
                .enumerate()
                .map(|(a, c)| row(c, &values, players)[node.player] + node.stage_utility(a)),
        );
        let f = if is_base(tree, params, node.depth()) {
            node.prior.clone()
        } else {
            let (f, lz) = logit_with_log_z(&own, &node.prior, params.level_resource(node.depth()))
                .map_err(|_| QHError::NonFiniteBackup { node: i })?;
            if !lz.is_finite() {
                return Err(QHError::NonFiniteBackup { node: i });
            }
            log_z[i] = lz;
            f
        };
        v.iter_mut().for_each(|x| *x = T::zero());
        for (a, c) in node.children.iter().enumerate() {
            for (vp, &q) in v.iter_mut().zip(row(c, &values, players)) {
                *vp = *vp + f[a] * q;
            }
            v[node.player] = v[node.player] + f[a] * node.stage_utility(a);
        }
        values[i * players..(i + 1) * players].copy_from_slice(&v);
        probs[i] = f;
    }
    Ok(QHSolution {
        policy: Policy::new(probs),
        log_z,
    })
}

fn solve_free_energy<T: Scalar>(tree: &GameTree<T>, params: &QHParams<T>) -> Result<QHSolution<T>, QHError> {
    let n = tree.len();
    let mut probs: Vec<Vec<T>> = vec![Vec::new(); n];
    let mut log_z = vec![T::zero(); n];
    let inv_gamma = if params.gamma > T::zero() {
        Some(T::one() / params.gamma)
    } else {
        None
    };
    for i in (0..n).rev() {
        let node = &tree.nodes()[i];
        if is_base(tree, params, node.depth()) {
            probs[i] = node.prior.clone();
            continue;
        }
        let beta_k = params.level_resource(node.depth());
        let scores: Vec<T> = node
            .children
            .iter()
            .enumerate()
            .map(|(a, c)| {
                let p = node.prior[a];
                if p <= T::zero() {
                    return T::neg_infinity();
                }
                let mut s = p.ln() + beta_k * node.stage_utility(a);
                match c {
                    Child::Terminal(pay) => s = s + beta_k * pay[node.player],
                    Child::Node(k) => {
                        if let Some(ig) = inv_gamma {
                            s = s + ig * log_z[k.0];
                        }
                    }
                }
                s
            })
            .collect();
        let lz = log_sum_exp(&scores);
        if !lz.is_finite() {
            return Err(QHError::NonFiniteBackup { node: i });
        }
        probs[i] = scores.iter().map(|&s| (s - lz).exp()).collect();
        log_z[i] = lz;
    }
    Ok(QHSolution {
        policy: Policy::new(probs),
        log_z,
    })
}

/// Expected payoff of the root player under the QH policy for each
/// `(beta, gamma)` pair; rows follow `betas`, columns `gammas`.
pub fn heatmap_grid<T: Scalar>(
    tree: &GameTree<T>,
    betas: &[T],
    gammas: &[T],
    adversarial: bool,
) -> Result<Vec<Vec<T>>, QHError> {
    let player = tree.node(tree.root()).player;
    betas
        .iter()
        .map(|&beta| {
            gammas
                .iter()
                .map(|&gamma| {
                    let params = QHParams {
                        beta,
                        gamma,
                        epsilon: T::lit(DEFAULT_EPSILON),
                        adversarial,
                    };
                    let sol = solve_qh(tree, &params)?;
                    Ok(crate::game_tree::expected_payoff(tree, &sol.policy, player)?)
                })
                .collect()
        })
        .collect()
}

/// Distributions at each reasoning level of a simultaneous game, top first.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelSolution<T> {
    pub levels: Vec<Vec<T>>,
}

impl<T: Scalar> LevelSolution<T> {
    /// The deciding (depth-0) player's distribution.
    pub fn top(&self) -> &[T] {
        &self.levels[0]
    }
}

/// Solves a pseudo-sequential game: the level at depth `K` plays the prior
/// and each shallower level logit-responds to the one below it.
pub fn solve_levels<T: Scalar>(game: &dyn LevelGame<T>, params: &QHParams<T>) -> Result<LevelSolution<T>, QHError> {
    params.validate()?;
    let depth = effective_depth(params, game.depth_cap())?;
    let schedule: Vec<T> = (0..depth).map(|k| params.level_resource(k)).collect();
    solve_levels_with_schedule(game, &schedule)
}

/// Same as [`solve_levels`] with an explicit per-depth resource schedule;
/// the base level sits at `schedule.len()`.
pub(crate) fn solve_levels_with_schedule<T: Scalar>(
    game: &dyn LevelGame<T>,
    schedule: &[T],
) -> Result<LevelSolution<T>, QHError> {
    let prior = game.prior();
    let mut levels = vec![prior.clone()];
    let mut lower = prior.clone();
    for (k, &beta_k) in schedule.iter().enumerate().rev() {
        let u = game.payoffs(&lower);
        let f = single_step_decision(&u, &prior, beta_k).map_err(|_| QHError::NonFiniteBackup { node: k })?;
        if f.iter().any(|x| !x.is_finite()) {
            return Err(QHError::NonFiniteBackup { node: k });
        }
        levels.push(f.clone());
        lower = f;
    }
    levels.reverse();
    Ok(LevelSolution { levels })
}
