#![allow(dead_code)]

pub mod oracle;
pub mod published;

use quantal_hierarchy::games::{build_bargain, build_centipede, build_market, BargainSpec, CentipedeSpec, MarketSpec};
use quantal_hierarchy::{build_tree, Child, ChildDesc, GameTree, NodeDesc, NodeId};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct TreeShape {
    pub max_levels: usize,
    pub max_actions: usize,
    pub players: usize,
    pub random_priors: bool,
    pub stage_utilities: bool,
    pub payoff_scale: f64,
}

impl Default for TreeShape {
    fn default() -> Self {
        TreeShape {
            max_levels: 3,
            max_actions: 3,
            players: 2,
            random_priors: true,
            stage_utilities: true,
            payoff_scale: 1.0,
        }
    }
}

/// Random finite tree; each action continues with probability 0.6 while
/// levels remain.
pub fn random_tree(seed: u64, shape: &TreeShape) -> GameTree<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut descs = Vec::new();
    let mut next = 1;
    let mut stack = vec![(0usize, 0usize)];
    while let Some((id, level)) = stack.pop() {
        let n = rng.gen_range(1..=shape.max_actions);
        let mut children = Vec::with_capacity(n);
        for _ in 0..n {
            if level + 1 < shape.max_levels && rng.gen_bool(0.6) {
                children.push(ChildDesc::Node(next));
                stack.push((next, level + 1));
                next += 1;
            } else {
                children.push(ChildDesc::Payoff(
                    (0..shape.players)
                        .map(|_| shape.payoff_scale * rng.gen_range(-1.0..1.0))
                        .collect(),
                ));
            }
        }
        let mut d = NodeDesc::new(
            id,
            rng.gen_range(0..shape.players),
            (0..n).map(|a| format!("a{a}")).collect(),
            children,
        );
        if shape.random_priors {
            let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
            let s: f64 = w.iter().sum();
            d.prior = Some(w.iter().map(|x| x / s).collect());
        }
        if shape.stage_utilities && rng.gen_bool(0.5) {
            d.utility = Some((0..n).map(|_| shape.payoff_scale * rng.gen_range(-0.5..0.5)).collect());
        }
        descs.push(d);
    }
    build_tree(descs, shape.players).expect("generated tree is valid")
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Game trees used by the limiting-case checks.
pub fn fixture_trees() -> Vec<(&'static str, GameTree<f64>)> {
    let uniform = TreeShape {
        random_priors: false,
        ..TreeShape::default()
    };
    let mut v = vec![
        ("centipede4", build_centipede(CentipedeSpec { moves: 4 }).unwrap()),
        ("centipede6", build_centipede(CentipedeSpec { moves: 6 }).unwrap()),
        ("ultimatum", build_bargain(BargainSpec::Ultimatum { v1: 0.0, v2: 50.0 }).unwrap()),
        ("ultimatum-10-60", build_bargain(BargainSpec::Ultimatum { v1: 10.0, v2: 60.0 }).unwrap()),
        (
            "market",
            build_market::<f64>(&MarketSpec::default(), 7).unwrap().pseudo_sequential_tree(5).unwrap(),
        ),
    ];
    for s in 0..10 {
        v.push(("random", random_tree(500 + s, &uniform)));
    }
    v
}

/// Nodes reached when following the backward-induction actions.
pub fn induced_path(tree: &GameTree<f64>, choice: &[usize]) -> Vec<NodeId> {
    let mut out = vec![tree.root()];
    let mut id = tree.root();
    while let Child::Node(next) = &tree.node(id).children[choice[id.0]] {
        id = *next;
        out.push(id);
    }
    out
}

/// One decision node over terminal payoffs.
pub fn single_node(utilities: &[f64], payoffs: &[f64], prior: Vec<f64>) -> GameTree<f64> {
    let mut d = NodeDesc::new(
        0,
        0,
        (0..payoffs.len()).map(|a| a.to_string()).collect(),
        payoffs.iter().map(|&p| ChildDesc::Payoff(vec![p])).collect(),
    );
    d.prior = Some(prior);
    d.utility = Some(utilities.to_vec());
    build_tree(vec![d], 1).unwrap()
}
