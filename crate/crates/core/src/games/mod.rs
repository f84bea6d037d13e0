//! Builders for the four canonical game families.
//!
//! Genuinely sequential games (centipede, bargaining) are [`GameTree`]s.
//! Simultaneous games (market entrance, p-beauty contest) are solved as a
//! chain of reasoning levels through the [`LevelGame`] trait: every level
//! faces the same payoff function, evaluated against the distribution of the
//! level below.

mod bargain;
mod beauty;
mod centipede;
mod market;

pub use bargain::{build_bargain, BargainSpec, BARGAIN_GRID};
pub use beauty::{build_beauty, BeautyGame, BeautySpec};
pub use centipede::{build_centipede, centipede_outcome_labels, CentipedeSpec};
pub use market::{build_market, MarketGame, MarketSpec};

use thiserror::Error;

use crate::game_tree::TreeError;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("capacity {capacity} not in the configured capacities {allowed:?}")]
    CapacityOutOfRange { capacity: usize, allowed: Vec<usize> },
    #[error("rejection payoffs must lie in [0, 100], got ({v1}, {v2})")]
    InvalidRejectionPayoffs { v1: f64, v2: f64 },
    #[error("invalid game specification: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// A simultaneous game viewed as a hierarchy of reasoning levels.
pub trait LevelGame<T: Scalar>: Send + Sync {
    fn n_actions(&self) -> usize;

    fn action_labels(&self) -> Vec<String>;

    /// Distribution played by the base level.
    fn prior(&self) -> Vec<T>;

    /// Payoff of each action against a lower level playing `lower`.
    fn payoffs(&self, lower: &[T]) -> Vec<T>;

    /// Maximum reasoning depth; `None` means the game has no end point.
    fn depth_cap(&self) -> Option<usize> {
        None
    }

    /// Equilibrium strategy.
    fn nash(&self) -> Vec<T>;

    fn as_dyn(&self) -> &dyn LevelGame<T>
    where
        Self: Sized,
    {
        self
    }
}
