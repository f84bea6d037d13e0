use crate::game_tree::{build_tree, ChildDesc, GameTree, NodeDesc};
use crate::games::{GameError, LevelGame};
use crate::scalar::{uniform, Scalar};

/// Market entrance: `n_players` decide to enter a market of a given
/// capacity or stay out.
#[derive(Clone, Debug, PartialEq)]
pub struct MarketSpec {
    pub n_players: usize,
    pub capacities: Vec<usize>,
}

impl Default for MarketSpec {
    fn default() -> Self {
        MarketSpec {
            n_players: 20,
            capacities: (1..=19).step_by(2).collect(),
        }
    }
}

pub const ENTER: usize = 0;
pub const STAY: usize = 1;

/// Market entrance at one capacity. Actions are `[enter, stay]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MarketGame<T> {
    n_players: usize,
    capacity: usize,
    depth_cap: Option<usize>,
    _scalar: std::marker::PhantomData<T>,
}

pub fn build_market<T: Scalar>(spec: &MarketSpec, capacity: usize) -> Result<MarketGame<T>, GameError> {
    if !spec.capacities.contains(&capacity) || capacity == 0 || capacity > spec.n_players {
        return Err(GameError::CapacityOutOfRange {
            capacity,
            allowed: spec.capacities.clone(),
        });
    }
    Ok(MarketGame {
        n_players: spec.n_players,
        capacity,
        depth_cap: None,
        _scalar: std::marker::PhantomData,
    })
}

impl<T: Scalar> MarketGame<T> {
    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn n_players(&self) -> usize {
        self.n_players
    }

    pub fn with_depth_cap(mut self, cap: Option<usize>) -> Self {
        self.depth_cap = cap;
        self
    }

    /// `1 + 2 (c - N * p)` where `p` is the lower level's entry probability.
    pub fn enter_payoff(&self, lower_entry: T) -> T {
        let c = T::from_usize_lossy(self.capacity);
        let n = T::from_usize_lossy(self.n_players);
        T::one() + T::lit(2.0) * (c - n * lower_entry)
    }

    pub fn stay_payoff(&self) -> T {
        T::one()
    }

    /// Explicit tree with one player per reasoning level. Player `j` acts at
    /// depth `j`; their payoff depends on the action of player `j + 1`, and
    /// the deepest player faces a base level playing uniformly.
    pub fn pseudo_sequential_tree(&self, levels: usize) -> Result<GameTree<T>, GameError> {
        if levels == 0 || levels > 16 {
            return Err(GameError::InvalidSpec(format!(
                "pseudo-sequential market tree needs 1..=16 levels, got {levels}"
            )));
        }
        let labels = vec!["enter".to_string(), "stay".to_string()];
        let base_entry = uniform::<T>(2)[ENTER];
        let mut descs = Vec::new();
        let mut next_id = 1usize;
        // (id, depth, actions so far)
        let mut stack = vec![(0usize, 0usize, Vec::<usize>::new())];
        while let Some((id, depth, path)) = stack.pop() {
            let mut children = Vec::with_capacity(2);
            for a in [ENTER, STAY] {
                let mut p = path.clone();
                p.push(a);
                if depth + 1 < levels {
                    children.push(ChildDesc::Node(next_id));
                    stack.push((next_id, depth + 1, p));
                    next_id += 1;
                } else {
                    let pay = (0..levels)
                        .map(|j| {
                            if p[j] == STAY {
                                self.stay_payoff()
                            } else if j + 1 < levels {
                                self.enter_payoff(if p[j + 1] == ENTER { T::one() } else { T::zero() })
                            } else {
                                self.enter_payoff(base_entry)
                            }
                        })
                        .collect();
                    children.push(ChildDesc::Payoff(pay));
                }
            }
            descs.push(NodeDesc::new(id, depth, labels.clone(), children));
        }
        Ok(build_tree(descs, levels)?)
    }
}

impl<T: Scalar> LevelGame<T> for MarketGame<T> {
    fn n_actions(&self) -> usize {
        2
    }

    fn action_labels(&self) -> Vec<String> {
        vec!["enter".into(), "stay".into()]
    }

    fn prior(&self) -> Vec<T> {
        uniform(2)
    }

    fn payoffs(&self, lower: &[T]) -> Vec<T> {
        vec![self.enter_payoff(lower[ENTER]), self.stay_payoff()]
    }

    fn depth_cap(&self) -> Option<usize> {
        self.depth_cap
    }

    /// Symmetric mixed equilibrium: expected entrants equal capacity.
    fn nash(&self) -> Vec<T> {
        let p = T::from_usize_lossy(self.capacity) / T::from_usize_lossy(self.n_players);
        vec![p, T::one() - p]
    }
}
