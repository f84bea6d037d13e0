//! Comparison models: logit QRE, agent-form QRE, level-k, Poisson cognitive
//! hierarchy and Nash / backward induction.

mod hierarchy;
mod induction;
mod qre;

pub use hierarchy::{
    cognitive_hierarchy_policy, level_k_policy, level_k_sequence, poisson_weights, CHParams, HierarchyGame,
};
pub use induction::{backward_induction, InductionResult};
pub use qre::{agent_qre, logit_qre_fixed_point, logit_response, QREParams, QREResult};
