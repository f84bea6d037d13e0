use crate::game_tree::{Child, GameTree, NodeId, Policy};
use crate::scalar::{argmax_set, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct InductionResult<T> {
    pub policy: Policy<T>,
    /// Subgame value of every node, per player.
    pub values: Vec<Vec<T>>,
    /// Nodes where several actions were optimal; the lowest index was taken.
    pub ties: Vec<NodeId>,
}

/// Subgame-perfect play: each node picks the action maximizing its stage
/// utility plus continuation value.
pub fn backward_induction<T: Scalar>(tree: &GameTree<T>) -> InductionResult<T> {
    let n = tree.len();
    let mut probs = vec![Vec::new(); n];
    let mut values: Vec<Vec<T>> = vec![Vec::new(); n];
    let mut ties = Vec::new();
    for i in (0..n).rev() {
        let node = &tree.nodes()[i];
        let q: Vec<Vec<T>> = node
            .children
            .iter()
            .enumerate()
            .map(|(a, c)| {
                let mut v = match c {
                    Child::Terminal(p) => p.clone(),
                    Child::Node(k) => values[k.0].clone(),
                };
                v[node.player] = v[node.player] + node.stage_utility(a);
                v
            })
            .collect();
        let own: Vec<T> = q.iter().map(|v| v[node.player]).collect();
        let best = argmax_set(&own);
        if best.len() > 1 {
            ties.push(NodeId(i));
        }
        let mut f = vec![T::zero(); node.num_actions()];
        f[best[0]] = T::one();
        values[i] = q[best[0]].clone();
        probs[i] = f;
    }
    ties.reverse();
    InductionResult {
        policy: Policy::new(probs),
        values,
        ties,
    }
}
