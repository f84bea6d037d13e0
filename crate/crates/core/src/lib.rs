//! Quantal Hierarchy bounded-rationality model over extensive-form games.
//!
//! The solver discounts a player's reasoning resource by `gamma` at every
//! level of look-ahead and runs a logit rule with the remaining resource,
//! falling back to prior play once it is exhausted. The crate also carries
//! the usual comparison models (logit QRE, agent QRE, level-k, cognitive
//! hierarchy, Nash), the four canonical game families and a cross-validated
//! fitting and ranking pipeline.
//!
//! Solvers are generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! fix the common choices.

pub mod baselines;
pub mod density;
pub mod eval;
pub mod experiment;
pub mod fitting;
pub mod game_tree;
pub mod games;
pub mod model;
pub mod observations;
pub mod qh;
pub mod scalar;
pub mod synthetic;

pub use game_tree::{build_tree, expected_payoff, Child, ChildDesc, GameTree, Node, NodeDesc, NodeId, Policy, TreeDesc, TreeError};
pub use qh::{effective_depth, heatmap_grid, single_step_decision, solve_levels, solve_qh, solve_qh_with, Backup, QHError, QHParams, QHSolution};
pub use scalar::Scalar;

pub type GameTree64 = GameTree<f64>;
pub type GameTree32 = GameTree<f32>;
pub type Policy64 = Policy<f64>;
pub type Policy32 = Policy<f32>;
pub type QHParams64 = QHParams<f64>;
pub type QHParams32 = QHParams<f32>;
