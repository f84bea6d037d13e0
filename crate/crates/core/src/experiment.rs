//! Game keys, built experiments and model predictions.
//!
//! Each experiment reduces a model's policy to one prediction vector in
//! probability units:
//! - market entrance: entry probability at every capacity;
//! - beauty contest: distribution over guesses `0..=100`;
//! - centipede: distribution over outcomes `take1 .. take{n}, pass`;
//! - bargaining: player 1's distribution over requests `0..=100`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::baselines::{
    agent_qre, backward_induction, cognitive_hierarchy_policy, level_k_policy, level_k_sequence, logit_qre_fixed_point,
    CHParams, QREParams,
};
use crate::game_tree::{GameTree, NodeId, Policy};
use crate::games::{
    build_bargain, build_beauty, build_centipede, build_market, centipede_outcome_labels, BargainSpec, BeautyGame,
    BeautySpec, CentipedeSpec, GameError, LevelGame, MarketGame, MarketSpec, BARGAIN_GRID,
};
use crate::model::{ModelFamily, ModelSpec};
use crate::qh::{solve_levels, solve_qh, QHError, QHParams};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameKeyError {
    #[error("unknown game key '{0}'; run list-games for the accepted keys")]
    Unknown(String),
    #[error("invalid game key '{key}': {reason}")]
    Invalid { key: String, reason: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredictError {
    #[error("model {model} is not defined for {game}")]
    Unsupported { model: String, game: String },
    #[error(transparent)]
    Solver(#[from] QHError),
    #[error(transparent)]
    Game(#[from] GameError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GameClass {
    Market,
    Beauty,
    Centipede,
    Bargaining,
}

impl GameClass {
    pub fn label(self) -> &'static str {
        match self {
            GameClass::Market => "Market Entrance",
            GameClass::Beauty => "Beauty Contest",
            GameClass::Centipede => "Centipede",
            GameClass::Bargaining => "Bargaining",
        }
    }
}

impl fmt::Display for GameClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

pub const BEAUTY_EXPERIMENTS: [&str; 6] = ["lab", "classroom", "takehome", "internet", "newspaper", "theorists"];
pub const MARKET_BLOCKS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GameKey {
    Market { block: usize, capacity: Option<usize> },
    Beauty { experiment: usize },
    Centipede { moves: usize },
    Ultimatum { v1: f64, v2: f64 },
    TwoStage { d: f64 },
}

impl GameKey {
    pub fn class(&self) -> GameClass {
        match self {
            GameKey::Market { .. } => GameClass::Market,
            GameKey::Beauty { .. } => GameClass::Beauty,
            GameKey::Centipede { .. } => GameClass::Centipede,
            GameKey::Ultimatum { .. } | GameKey::TwoStage { .. } => GameClass::Bargaining,
        }
    }

    /// The key with any market capacity stripped.
    pub fn experiment_key(&self) -> GameKey {
        match *self {
            GameKey::Market { block, .. } => GameKey::Market { block, capacity: None },
            k => k,
        }
    }

    /// Human-readable experiment label.
    pub fn label(&self) -> String {
        match *self {
            GameKey::Market { block, capacity: None } => format!("Block {block}"),
            GameKey::Market {
                block,
                capacity: Some(c),
            } => format!("Block {block} c={c}"),
            GameKey::Beauty { experiment } => {
                let e = BEAUTY_EXPERIMENTS[experiment];
                let mut s = e.to_string();
                s[..1].make_ascii_uppercase();
                if e == "takehome" {
                    "Take Home".to_string()
                } else {
                    s
                }
            }
            GameKey::Centipede { moves } => format!("{moves}-level Centipede"),
            GameKey::Ultimatum { v1, v2 } => format!("Ultimatum ({v1}, {v2})"),
            GameKey::TwoStage { d } => format!("Two-stage D={d}"),
        }
    }

    /// Ordering used for reports.
    pub fn report_order(&self, other: &GameKey) -> Ordering {
        fn rank(k: &GameKey) -> (u8, f64, f64) {
            match *k {
                GameKey::Market { block, capacity } => (0, block as f64, capacity.map_or(-1.0, |c| c as f64)),
                GameKey::Beauty { experiment } => (1, experiment as f64, 0.0),
                GameKey::Centipede { moves } => (2, moves as f64, 0.0),
                GameKey::Ultimatum { v1, v2 } => (3, v1, v2),
                GameKey::TwoStage { d } => (4, -d, 0.0),
            }
        }
        let (a, b) = (rank(self), rank(other));
        a.0.cmp(&b.0)
            .then(a.1.total_cmp(&b.1))
            .then(a.2.total_cmp(&b.2))
    }

    /// Whether reasoning has no natural end point (simultaneous games).
    pub fn is_open_ended(&self) -> bool {
        matches!(self.class(), GameClass::Market | GameClass::Beauty)
    }

    /// Accepted key patterns, for help output.
    pub fn help_lines() -> Vec<String> {
        vec![
            "market:block{1..5}              market entrance, capacities 1,3,..,19".into(),
            "market:block{1..5}:c{1,3,..,19} market entrance at one capacity".into(),
            format!("beauty:{{{}}}  p-beauty contest, p = 2/3", BEAUTY_EXPERIMENTS.join(",")),
            "centipede:{4,6}                 centipede game".into(),
            "ultimatum:V1-V2                 ultimatum game with rejection payoffs, e.g. 10-10, 10-60, 70-10, 0-50".into(),
            "twostage:D{0.2..0.9}            two-stage bargaining with disagreement penalty D".into(),
        ]
    }

    /// Keys of the published experiments.
    pub fn catalogue() -> Vec<GameKey> {
        let mut keys: Vec<GameKey> = (1..=MARKET_BLOCKS)
            .map(|block| GameKey::Market { block, capacity: None })
            .collect();
        keys.extend((0..BEAUTY_EXPERIMENTS.len()).map(|experiment| GameKey::Beauty { experiment }));
        keys.extend([4, 6].map(|moves| GameKey::Centipede { moves }));
        keys.extend([(10.0, 10.0), (10.0, 60.0), (70.0, 10.0)].map(|(v1, v2)| GameKey::Ultimatum { v1, v2 }));
        keys.extend((2..=9).rev().map(|d| GameKey::TwoStage { d: d as f64 / 10.0 }));
        keys
    }
}

impl fmt::Display for GameKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            GameKey::Market { block, capacity: None } => write!(f, "market:block{block}"),
            GameKey::Market {
                block,
                capacity: Some(c),
            } => write!(f, "market:block{block}:c{c}"),
            GameKey::Beauty { experiment } => write!(f, "beauty:{}", BEAUTY_EXPERIMENTS[experiment]),
            GameKey::Centipede { moves } => write!(f, "centipede:{moves}"),
            GameKey::Ultimatum { v1, v2 } => write!(f, "ultimatum:{v1}-{v2}"),
            GameKey::TwoStage { d } => write!(f, "twostage:D{d}"),
        }
    }
}

impl FromStr for GameKey {
    type Err = GameKeyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let invalid = |reason: &str| GameKeyError::Invalid {
            key: s.to_string(),
            reason: reason.to_string(),
        };
        let mut parts = s.split(':');
        let family = parts.next().unwrap_or_default();
        let rest: Vec<&str> = parts.collect();
        match (family, rest.as_slice()) {
            ("market", [block, tail @ ..]) if tail.len() <= 1 => {
                let block: usize = block
                    .strip_prefix("block")
                    .and_then(|b| b.parse().ok())
                    .ok_or_else(|| invalid("expected block1..block5"))?;
                if !(1..=MARKET_BLOCKS).contains(&block) {
                    return Err(invalid("block must be 1..5"));
                }
                let capacity = match tail.first() {
                    None => None,
                    Some(c) => {
                        let c: usize = c
                            .strip_prefix('c')
                            .and_then(|c| c.parse().ok())
                            .ok_or_else(|| invalid("expected capacity c1, c3, .., c19"))?;
                        if !MarketSpec::default().capacities.contains(&c) {
                            return Err(invalid("capacity must be one of 1,3,..,19"));
                        }
                        Some(c)
                    }
                };
                Ok(GameKey::Market { block, capacity })
            }
            ("beauty", [name]) => BEAUTY_EXPERIMENTS
                .iter()
                .position(|e| e == name)
                .map(|experiment| GameKey::Beauty { experiment })
                .ok_or_else(|| invalid("unknown beauty-contest experiment")),
            ("centipede", [m]) => match m.parse::<usize>() {
                Ok(moves @ (4 | 6)) => Ok(GameKey::Centipede { moves }),
                _ => Err(invalid("centipede takes 4 or 6 moves")),
            },
            ("ultimatum", [v]) => {
                let (a, b) = v.split_once('-').ok_or_else(|| invalid("expected V1-V2"))?;
                let parse = |x: &str| x.parse::<f64>().ok().filter(|v| (0.0..=100.0).contains(v));
                match (parse(a), parse(b)) {
                    (Some(v1), Some(v2)) => Ok(GameKey::Ultimatum { v1, v2 }),
                    _ => Err(invalid("rejection payoffs must be numbers in [0, 100]")),
                }
            }
            ("twostage", [d]) => d
                .strip_prefix('D')
                .and_then(|d| d.parse::<f64>().ok())
                .filter(|d| *d > 0.0 && *d <= 1.0)
                .map(|d| GameKey::TwoStage { d })
                .ok_or_else(|| invalid("expected D followed by a penalty in (0, 1]")),
            _ => Err(GameKeyError::Unknown(s.to_string())),
        }
    }
}

/// A built game.
#[derive(Clone, Debug)]
pub enum Game<T: Scalar> {
    Market(Vec<MarketGame<T>>),
    Beauty(BeautyGame<T>),
    Tree(GameTree<T>),
}

/// A game ready for prediction.
#[derive(Clone, Debug)]
pub struct Experiment<T: Scalar> {
    pub key: GameKey,
    pub game: Game<T>,
}

impl<T: Scalar> Experiment<T> {
    pub fn build(key: GameKey) -> Result<Self, PredictError> {
        let caps = match key {
            GameKey::Market { capacity: Some(c), .. } => vec![c],
            _ => MarketSpec::default().capacities,
        };
        Self::build_with_capacities(key, &caps)
    }

    /// Builds a market experiment restricted to `capacities` (ignored for
    /// other games).
    pub fn build_with_capacities(key: GameKey, capacities: &[usize]) -> Result<Self, PredictError> {
        let game = match key {
            GameKey::Market { .. } => {
                let spec = MarketSpec::default();
                Game::Market(
                    capacities
                        .iter()
                        .map(|&c| build_market(&spec, c))
                        .collect::<Result<_, _>>()?,
                )
            }
            GameKey::Beauty { .. } => Game::Beauty(build_beauty(&BeautySpec::default())?),
            GameKey::Centipede { moves } => Game::Tree(build_centipede(CentipedeSpec { moves })?),
            GameKey::Ultimatum { v1, v2 } => Game::Tree(build_bargain(BargainSpec::Ultimatum { v1, v2 })?),
            GameKey::TwoStage { d } => Game::Tree(build_bargain(BargainSpec::TwoStage { d })?),
        };
        Ok(Experiment { key, game })
    }

    /// Caps the reasoning depth of simultaneous games.
    pub fn with_level_depth_cap(mut self, cap: Option<usize>) -> Self {
        self.game = match self.game {
            Game::Market(ms) => Game::Market(ms.into_iter().map(|m| m.with_depth_cap(cap)).collect()),
            Game::Beauty(b) => Game::Beauty(b.with_depth_cap(cap)),
            g => g,
        };
        self
    }

    pub fn capacities(&self) -> Vec<usize> {
        match &self.game {
            Game::Market(ms) => ms.iter().map(|m| m.capacity()).collect(),
            _ => Vec::new(),
        }
    }

    /// Labels of the prediction vector entries.
    pub fn outcome_labels(&self) -> Vec<String> {
        match (&self.game, self.key) {
            (Game::Market(ms), _) => ms.iter().map(|m| format!("c{}", m.capacity())).collect(),
            (Game::Beauty(b), _) => b.action_labels(),
            (_, GameKey::Centipede { moves }) => centipede_outcome_labels(moves),
            _ => (0..=BARGAIN_GRID).map(|x| x.to_string()).collect(),
        }
    }

    /// Full per-node policy on tree games.
    pub fn tree(&self) -> Option<&GameTree<T>> {
        match &self.game {
            Game::Tree(t) => Some(t),
            _ => None,
        }
    }

    fn level_games(&self) -> Vec<&dyn LevelGame<T>> {
        match &self.game {
            Game::Market(ms) => ms.iter().map(|m| m.as_dyn()).collect(),
            Game::Beauty(b) => vec![b.as_dyn()],
            Game::Tree(_) => Vec::new(),
        }
    }

    /// Reduces level-game strategies (one per game) to the prediction.
    fn reduce_levels(&self, strategies: Vec<Vec<T>>) -> Vec<T> {
        match &self.game {
            Game::Market(_) => strategies.into_iter().map(|s| s[0]).collect(),
            _ => strategies.into_iter().next().unwrap_or_default(),
        }
    }

    /// Reduces a tree policy to the prediction.
    pub fn reduce_policy(&self, policy: &Policy<T>) -> Result<Vec<T>, PredictError> {
        let tree = self.tree().expect("tree game");
        Ok(match self.key {
            GameKey::Centipede { .. } => tree.leaf_distribution(policy).map_err(QHError::from)?,
            _ => policy.get(NodeId(0)).to_vec(),
        })
    }

    /// Per-node policy for a tree game.
    pub fn tree_policy(&self, model: &ModelSpec) -> Result<Policy<T>, PredictError> {
        let tree = self.tree().ok_or_else(|| self.unsupported(model))?;
        Ok(match *model {
            ModelSpec::QuantalHierarchy { beta, gamma, epsilon } => {
                let params = QHParams::new(T::lit(beta), T::lit(gamma))?.with_epsilon(T::lit(epsilon))?;
                solve_qh(tree, &params)?.policy
            }
            ModelSpec::QRE { lambda } | ModelSpec::AgentQRE { lambda } => {
                check_non_negative(lambda, "lambda")?;
                agent_qre(tree, &QREParams::new(T::lit(lambda)))
            }
            ModelSpec::LevelK { k } => level_k_policy(tree, k, None),
            ModelSpec::CognitiveHierarchy { tau } => {
                check_non_negative(tau, "tau")?;
                cognitive_hierarchy_policy(tree, &CHParams::new(T::lit(tau)))
            }
            ModelSpec::Nash => backward_induction(tree).policy,
        })
    }

    fn unsupported(&self, model: &ModelSpec) -> PredictError {
        PredictError::Unsupported {
            model: model.to_string(),
            game: self.key.to_string(),
        }
    }

    /// Prediction vector of `model` on this experiment.
    pub fn predict(&self, model: &ModelSpec) -> Result<Vec<T>, PredictError> {
        if self.tree().is_some() {
            let policy = self.tree_policy(model)?;
            return self.reduce_policy(&policy);
        }
        let games = self.level_games();
        let strategies: Vec<Vec<T>> = match *model {
            ModelSpec::QuantalHierarchy { beta, gamma, epsilon } => {
                let params = QHParams::new(T::lit(beta), T::lit(gamma))?.with_epsilon(T::lit(epsilon))?;
                games
                    .iter()
                    .map(|g| Ok(solve_levels(*g, &params)?.top().to_vec()))
                    .collect::<Result<_, QHError>>()?
            }
            ModelSpec::QRE { lambda } => {
                check_non_negative(lambda, "lambda")?;
                let params = QREParams::new(T::lit(lambda));
                games
                    .iter()
                    .map(|g| {
                        let r = logit_qre_fixed_point(g.n_actions(), |p| g.payoffs(p), &params);
                        if !r.converged {
                            log::warn!(
                                "QRE fixed point did not converge on {} (lambda {lambda}, residual {})",
                                self.key,
                                r.residual
                            );
                        }
                        r.strategy
                    })
                    .collect()
            }
            ModelSpec::AgentQRE { .. } => return Err(self.unsupported(model)),
            ModelSpec::LevelK { k } => games.iter().map(|g| level_k_policy(*g, k, None)).collect(),
            ModelSpec::CognitiveHierarchy { tau } => {
                check_non_negative(tau, "tau")?;
                games
                    .iter()
                    .map(|g| cognitive_hierarchy_policy(*g, &CHParams::new(T::lit(tau))))
                    .collect()
            }
            ModelSpec::Nash => games.iter().map(|g| g.nash()).collect(),
        };
        Ok(self.reduce_levels(strategies))
    }

    /// Predictions of level-k for `k = 0..=max_k`, sharing the iteration.
    pub fn level_k_predictions(&self, max_k: usize) -> Result<Vec<Vec<T>>, PredictError> {
        if let Some(tree) = self.tree() {
            return level_k_sequence(tree, max_k)
                .iter()
                .map(|p| self.reduce_policy(p))
                .collect();
        }
        let per_game: Vec<Vec<Vec<T>>> = self
            .level_games()
            .iter()
            .map(|g| level_k_sequence(*g, max_k))
            .collect();
        Ok((0..=max_k)
            .map(|k| self.reduce_levels(per_game.iter().map(|seq| seq[k].clone()).collect()))
            .collect())
    }

    /// Whether `family` can be evaluated on this experiment.
    pub fn supports(&self, family: ModelFamily) -> bool {
        family != ModelFamily::AgentQRE || self.tree().is_some()
    }
}

fn check_non_negative(x: f64, name: &str) -> Result<(), QHError> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(QHError::InvalidParams(format!("{name} must be finite and >= 0, got {x}")))
    }
}
