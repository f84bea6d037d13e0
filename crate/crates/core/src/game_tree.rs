//! Extensive-form game trees with history-conditional utilities.
//!
//! A [`GameTree`] is a rooted tree of decision nodes. Leaves are not nodes of
//! their own: a node's action either leads to another node or ends the game
//! with a payoff vector (one entry per player). Node ids are dense and
//! assigned in breadth-first order, so every child id is larger than its
//! parent's and solvers can sweep `(0..len).rev()` as a post-order.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{uniform, Scalar};

/// Dense node index; the root is `NodeId(0)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("tree has no nodes")]
    Empty,
    #[error("a game needs at least one player")]
    NoPlayers,
    #[error("node id {0} appears more than once")]
    DuplicateId(usize),
    #[error("node {node} references missing child {child}")]
    DanglingChild { node: usize, child: usize },
    #[error("node {0} is referenced by more than one parent")]
    MultipleParents(usize),
    #[error("descriptions contain a cycle")]
    CycleDetected,
    #[error("descriptions contain more than one root ({0:?})")]
    MultipleRoots(Vec<usize>),
    #[error("node {0} has no actions")]
    EmptyActions(usize),
    #[error("node {node} has {children} children for {actions} actions")]
    ChildCountMismatch { node: usize, actions: usize, children: usize },
    #[error("node {node}: acting player {player} out of range for {players} players")]
    InvalidPlayer { node: usize, player: usize, players: usize },
    #[error("node {node}: payoff vector has {got} entries, expected {expected}")]
    PayoffArityMismatch { node: usize, expected: usize, got: usize },
    #[error("node {node}: prior must be non-negative, sum to 1 and match the action count")]
    InvalidPrior { node: usize },
    #[error("node {node}: utility table has {got} entries for {expected} actions")]
    UtilityArityMismatch { node: usize, expected: usize, got: usize },
    #[error("node {node}: non-finite payoff or utility")]
    NonFinite { node: usize },
    #[error("policy has no valid distribution for node {0}")]
    MissingNodePolicy(NodeId),
    #[error("player {player} out of range for {players} players")]
    PlayerOutOfRange { player: usize, players: usize },
    #[error("malformed tree description: {0}")]
    Format(String),
}

/// Where an action leads.
#[derive(Clone, Debug, PartialEq)]
pub enum Child<T> {
    Node(NodeId),
    Terminal(Vec<T>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node<T> {
    pub player: usize,
    pub actions: Vec<String>,
    pub prior: Vec<T>,
    /// Stage utility `U[a | history]` credited to the acting player when
    /// the action is taken, on top of whatever the action leads to.
    pub utility: Option<Vec<T>>,
    pub children: Vec<Child<T>>,
    pub(crate) parent: Option<NodeId>,
    pub(crate) depth: usize,
}

impl<T: Scalar> Node<T> {
    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn parent(&self) -> Option<NodeId> {
        self.parent
    }

    pub fn stage_utility(&self, action: usize) -> T {
        self.utility.as_ref().map_or(T::zero(), |u| u[action])
    }
}

/// Validated, immutable game tree.
#[derive(Clone, Debug, PartialEq)]
pub struct GameTree<T> {
    nodes: Vec<Node<T>>,
    players: usize,
    depth_cap: Option<usize>,
}

// ---------------------------------------------------------------------------
// Description format

/// Serializable child reference: `{"node": 3}` or `{"payoff": [1.0, 0.0]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChildDesc<T> {
    Node(usize),
    Payoff(Vec<T>),
}

/// One record of the tree description format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de>"))]
pub struct NodeDesc<T> {
    pub id: usize,
    pub player: usize,
    pub actions: Vec<String>,
    pub children: Vec<ChildDesc<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<Vec<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utility: Option<Vec<T>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de>"))]
pub struct TreeDesc<T> {
    pub players: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_cap: Option<usize>,
    pub nodes: Vec<NodeDesc<T>>,
}

impl<T> NodeDesc<T> {
    /// Node with uniform prior and no stage utilities.
    pub fn new(id: usize, player: usize, actions: Vec<String>, children: Vec<ChildDesc<T>>) -> Self {
        NodeDesc {
            id,
            player,
            actions,
            children,
            prior: None,
            utility: None,
        }
    }
}

/// Validates node descriptions and assigns breadth-first node ids.
pub fn build_tree<T: Scalar>(descs: Vec<NodeDesc<T>>, players: usize) -> Result<GameTree<T>, TreeError> {
    if players == 0 {
        return Err(TreeError::NoPlayers);
    }
    if descs.is_empty() {
        return Err(TreeError::Empty);
    }

    let mut by_id: HashMap<usize, usize> = HashMap::with_capacity(descs.len());
    for (pos, d) in descs.iter().enumerate() {
        if by_id.insert(d.id, pos).is_some() {
            return Err(TreeError::DuplicateId(d.id));
        }
    }

    let mut referenced = vec![false; descs.len()];
    for d in &descs {
        validate_desc(d, players)?;
        for c in &d.children {
            if let ChildDesc::Node(child) = c {
                let pos = *by_id.get(child).ok_or(TreeError::DanglingChild {
                    node: d.id,
                    child: *child,
                })?;
                if referenced[pos] {
                    return Err(TreeError::MultipleParents(*child));
                }
                referenced[pos] = true;
            }
        }
    }

    let roots: Vec<usize> = (0..descs.len()).filter(|&p| !referenced[p]).collect();
    let root = match roots.as_slice() {
        [] => return Err(TreeError::CycleDetected),
        [r] => *r,
        many => return Err(TreeError::MultipleRoots(many.iter().map(|&p| descs[p].id).collect())),
    };

    // Breadth-first renumbering.
    let mut order = Vec::with_capacity(descs.len());
    let mut new_id = vec![usize::MAX; descs.len()];
    let mut queue = VecDeque::from([root]);
    new_id[root] = 0;
    while let Some(pos) = queue.pop_front() {
        order.push(pos);
        for c in &descs[pos].children {
            if let ChildDesc::Node(child) = c {
                let cpos = by_id[child];
                new_id[cpos] = order.len() + queue.len();
                queue.push_back(cpos);
            }
        }
    }
    if order.len() != descs.len() {
        // Every unreached description has exactly one parent, so the rest
        // must close a loop.
        return Err(TreeError::CycleDetected);
    }

    let mut slots: Vec<Option<NodeDesc<T>>> = descs.into_iter().map(Some).collect();
    let mut nodes: Vec<Node<T>> = Vec::with_capacity(order.len());
    for &pos in &order {
        let d = slots[pos].take().expect("each description visited once");
        let n = d.actions.len();
        let children = d
            .children
            .into_iter()
            .map(|c| match c {
                ChildDesc::Node(child) => Child::Node(NodeId(new_id[by_id[&child]])),
                ChildDesc::Payoff(p) => Child::Terminal(p),
            })
            .collect();
        nodes.push(Node {
            player: d.player,
            actions: d.actions,
            prior: d.prior.unwrap_or_else(|| uniform(n)),
            utility: d.utility,
            children,
            parent: None,
            depth: 0,
        });
    }
    for id in 0..nodes.len() {
        let depth = nodes[id].depth;
        let kids: Vec<usize> = nodes[id]
            .children
            .iter()
            .filter_map(|c| match c {
                Child::Node(NodeId(k)) => Some(*k),
                Child::Terminal(_) => None,
            })
            .collect();
        for k in kids {
            nodes[k].parent = Some(NodeId(id));
            nodes[k].depth = depth + 1;
        }
    }

    Ok(GameTree {
        nodes,
        players,
        depth_cap: None,
    })
}

fn validate_desc<T: Scalar>(d: &NodeDesc<T>, players: usize) -> Result<(), TreeError> {
    let n = d.actions.len();
    if n == 0 {
        return Err(TreeError::EmptyActions(d.id));
    }
    if d.children.len() != n {
        return Err(TreeError::ChildCountMismatch {
            node: d.id,
            actions: n,
            children: d.children.len(),
        });
    }
    if d.player >= players {
        return Err(TreeError::InvalidPlayer {
            node: d.id,
            player: d.player,
            players,
        });
    }
    for c in &d.children {
        if let ChildDesc::Payoff(p) = c {
            if p.len() != players {
                return Err(TreeError::PayoffArityMismatch {
                    node: d.id,
                    expected: players,
                    got: p.len(),
                });
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(TreeError::NonFinite { node: d.id });
            }
        }
    }
    if let Some(prior) = &d.prior {
        let sum: T = prior.iter().copied().sum();
        let ok = prior.len() == n
            && prior.iter().all(|&p| p >= T::zero() && p.is_finite())
            && (sum - T::one()).abs() <= T::lit(1e-12).max(T::epsilon() * T::lit(8.0));
        if !ok {
            return Err(TreeError::InvalidPrior { node: d.id });
        }
    }
    if let Some(u) = &d.utility {
        if u.len() != n {
            return Err(TreeError::UtilityArityMismatch {
                node: d.id,
                expected: n,
                got: u.len(),
            });
        }
        if u.iter().any(|x| !x.is_finite()) {
            return Err(TreeError::NonFinite { node: d.id });
        }
    }
    Ok(())
}

impl<T: Scalar> GameTree<T> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn players(&self) -> usize {
        self.players
    }

    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    pub fn node(&self, id: NodeId) -> &Node<T> {
        &self.nodes[id.0]
    }

    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    pub fn depth_cap(&self) -> Option<usize> {
        self.depth_cap
    }

    /// Caps reasoning depth: nodes at depth `>= cap` fall back to their prior.
    pub fn with_depth_cap(mut self, cap: Option<usize>) -> Self {
        self.depth_cap = cap;
        self
    }

    /// Number of decisions on the longest root-to-leaf path.
    pub fn height(&self) -> usize {
        self.nodes.iter().map(|n| n.depth + 1).max().unwrap_or(0)
    }

    /// Leaves in (node id, action) order.
    pub fn leaves(&self) -> impl Iterator<Item = (NodeId, usize, &[T])> + '_ {
        self.nodes.iter().enumerate().flat_map(|(i, node)| {
            node.children.iter().enumerate().filter_map(move |(a, c)| match c {
                Child::Terminal(p) => Some((NodeId(i), a, p.as_slice())),
                Child::Node(_) => None,
            })
        })
    }

    pub fn num_leaves(&self) -> usize {
        self.leaves().count()
    }

    /// Path to `id` as (node, action) pairs from the root.
    pub fn history(&self, id: NodeId) -> Vec<(NodeId, usize)> {
        let mut path = Vec::new();
        let mut cur = id;
        while let Some(parent) = self.nodes[cur.0].parent {
            let action = self.nodes[parent.0]
                .children
                .iter()
                .position(|c| matches!(c, Child::Node(k) if *k == cur))
                .expect("parent lists child");
            path.push((parent, action));
            cur = parent;
        }
        path.reverse();
        path
    }

    /// The policy that plays every node's prior.
    pub fn prior_policy(&self) -> Policy<T> {
        Policy::new(self.nodes.iter().map(|n| n.prior.clone()).collect())
    }

    pub fn uniform_policy(&self) -> Policy<T> {
        Policy::new(self.nodes.iter().map(|n| uniform(n.num_actions())).collect())
    }

    /// Checks that `policy` has a distribution of the right length for
    /// every node.
    pub fn check_policy(&self, policy: &Policy<T>) -> Result<(), TreeError> {
        for (i, node) in self.nodes.iter().enumerate() {
            match policy.probs.get(i) {
                Some(p) if p.len() == node.num_actions() => {}
                _ => return Err(TreeError::MissingNodePolicy(NodeId(i))),
            }
        }
        Ok(())
    }

    /// Probability of reaching each node under `policy`.
    pub fn reach_probabilities(&self, policy: &Policy<T>) -> Result<Vec<T>, TreeError> {
        self.check_policy(policy)?;
        let mut reach = vec![T::zero(); self.nodes.len()];
        reach[0] = T::one();
        for (i, node) in self.nodes.iter().enumerate() {
            for (a, c) in node.children.iter().enumerate() {
                if let Child::Node(k) = c {
                    reach[k.0] = reach[i] * policy.probs[i][a];
                }
            }
        }
        Ok(reach)
    }

    /// Probability of ending at each leaf, in [`GameTree::leaves`] order.
    pub fn leaf_distribution(&self, policy: &Policy<T>) -> Result<Vec<T>, TreeError> {
        let reach = self.reach_probabilities(policy)?;
        Ok(self
            .leaves()
            .map(|(n, a, _)| reach[n.0] * policy.probs[n.0][a])
            .collect())
    }

    pub fn to_desc(&self) -> TreeDesc<T> {
        let nodes = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| NodeDesc {
                id: i,
                player: n.player,
                actions: n.actions.clone(),
                children: n
                    .children
                    .iter()
                    .map(|c| match c {
                        Child::Node(k) => ChildDesc::Node(k.0),
                        Child::Terminal(p) => ChildDesc::Payoff(p.clone()),
                    })
                    .collect(),
                prior: Some(n.prior.clone()),
                utility: n.utility.clone(),
            })
            .collect();
        TreeDesc {
            players: self.players,
            depth_cap: self.depth_cap,
            nodes,
        }
    }

    pub fn from_desc(desc: TreeDesc<T>) -> Result<Self, TreeError> {
        let cap = desc.depth_cap;
        Ok(build_tree(desc.nodes, desc.players)?.with_depth_cap(cap))
    }
}

impl GameTree<f64> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_desc()).expect("tree serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TreeError> {
        let desc: TreeDesc<f64> = serde_json::from_str(text).map_err(|e| TreeError::Format(e.to_string()))?;
        Self::from_desc(desc)
    }
}

/// Expected terminal payoff (plus any stage utilities) of `player` when every
/// node plays according to `policy`.
pub fn expected_payoff<T: Scalar>(tree: &GameTree<T>, policy: &Policy<T>, player: usize) -> Result<T, TreeError> {
    if player >= tree.players {
        return Err(TreeError::PlayerOutOfRange {
            player,
            players: tree.players,
        });
    }
    tree.check_policy(policy)?;
    let mut value = vec![T::zero(); tree.len()];
    for i in (0..tree.len()).rev() {
        let node = &tree.nodes[i];
        let mut v = T::zero();
        for (a, c) in node.children.iter().enumerate() {
            let mut q = match c {
                Child::Terminal(p) => p[player],
                Child::Node(k) => value[k.0],
            };
            if node.player == player {
                q = q + node.stage_utility(a);
            }
            v = v + policy.probs[i][a] * q;
        }
        value[i] = v;
    }
    Ok(value[0])
}

/// Per-node action distributions.
#[derive(Clone, Debug, PartialEq)]
pub struct Policy<T> {
    probs: Vec<Vec<T>>,
}

impl<T: Scalar> Policy<T> {
    pub fn new(probs: Vec<Vec<T>>) -> Self {
        Policy { probs }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn get(&self, id: NodeId) -> &[T] {
        &self.probs[id.0]
    }

    pub fn set(&mut self, id: NodeId, dist: Vec<T>) {
        self.probs[id.0] = dist;
    }

    pub fn as_slices(&self) -> &[Vec<T>] {
        &self.probs
    }

    /// Largest elementwise absolute difference.
    pub fn max_abs_diff(&self, other: &Policy<T>) -> T {
        self.probs
            .iter()
            .zip(&other.probs)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (*x - *y).abs()))
            .fold(T::zero(), T::max)
    }

    /// True if every vector is a distribution within `tol`.
    pub fn is_valid(&self, tol: T) -> bool {
        self.probs.iter().all(|p| {
            let s: T = p.iter().copied().sum();
            (s - T::one()).abs() <= tol && p.iter().all(|&x| x >= -tol && x <= T::one() + tol)
        })
    }
}
