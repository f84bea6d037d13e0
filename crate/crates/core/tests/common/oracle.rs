//! Independent recursive oracles for the QH solver.

use quantal_hierarchy::{Child, GameTree, NodeId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const EPS: f64 = 1e-8;

/// Linear-domain partition-function recursion. Returns the partition value
/// of the subtree and fills `out` with each node's distribution.
pub fn free_energy_oracle(tree: &GameTree<f64>, id: NodeId, depth: usize, beta: f64, gamma: f64, out: &mut [Vec<f64>]) -> f64 {
    let node = tree.node(id);
    let b = beta * gamma.powi(depth as i32);
    // children are solved regardless, so every node gets a distribution
    let child_z: Vec<Option<f64>> = node
        .children
        .iter()
        .map(|c| match c {
            Child::Node(k) => Some(free_energy_oracle(tree, *k, depth + 1, beta, gamma, out)),
            Child::Terminal(_) => None,
        })
        .collect();
    if b.abs() < EPS {
        out[id.0] = node.prior.clone();
        return 1.0;
    }
    let w: Vec<f64> = (0..node.num_actions())
        .map(|a| {
            let mut u = node.stage_utility(a);
            if let Child::Terminal(p) = &node.children[a] {
                u += p[node.player];
            }
            let future = match child_z[a] {
                Some(z) if gamma > 0.0 => z.powf(1.0 / gamma),
                _ => 1.0,
            };
            node.prior[a] * (b * u).exp() * future
        })
        .collect();
    let z: f64 = w.iter().sum();
    out[id.0] = w.iter().map(|x| x / z).collect();
    z
}

/// Every complete play below `id` with its probability under `policy` and
/// the payoff collected by `player` along it.
pub fn paths(tree: &GameTree<f64>, id: NodeId, policy: &[Vec<f64>], player: usize) -> Vec<(f64, f64)> {
    let node = tree.node(id);
    let mut out = Vec::new();
    for (a, c) in node.children.iter().enumerate() {
        let pa = policy[id.0][a];
        let stage = if node.player == player { node.stage_utility(a) } else { 0.0 };
        match c {
            Child::Terminal(p) => out.push((pa, stage + p[player])),
            Child::Node(k) => {
                for (q, v) in paths(tree, *k, policy, player) {
                    out.push((pa * q, stage + v));
                }
            }
        }
    }
    out
}

/// Logit over expected continuation values, each computed by enumerating
/// plays under the already-solved deeper nodes.
pub fn expected_oracle(tree: &GameTree<f64>, beta: f64, gamma: f64) -> Vec<Vec<f64>> {
    let mut policy: Vec<Vec<f64>> = tree.nodes().iter().map(|n| vec![f64::NAN; n.num_actions()]).collect();
    let mut order: Vec<usize> = (0..tree.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(tree.node(NodeId(i)).depth()));
    for i in order {
        let node = tree.node(NodeId(i));
        let b = beta * gamma.powi(node.depth() as i32);
        if b.abs() < EPS {
            policy[i] = node.prior.clone();
            continue;
        }
        let q: Vec<f64> = (0..node.num_actions())
            .map(|a| {
                node.stage_utility(a)
                    + match &node.children[a] {
                        Child::Terminal(p) => p[node.player],
                        Child::Node(k) => paths(tree, *k, &policy, node.player).iter().map(|(p, v)| p * v).sum(),
                    }
            })
            .collect();
        let w: Vec<f64> = q.iter().zip(&node.prior).map(|(u, p)| p * (b * u).exp()).collect();
        let z: f64 = w.iter().sum();
        policy[i] = w.iter().map(|x| x / z).collect();
    }
    policy
}

pub fn pairs(seed: u64, n: usize) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen_range(0.0..3.0), rng.gen_range(0.2..1.0))).collect();
    // the edges of the parameter square
    v.extend([(0.0, 0.5), (2.0, 0.0), (1.0, 1.0), (1e-9, 0.9)]);
    v
}
