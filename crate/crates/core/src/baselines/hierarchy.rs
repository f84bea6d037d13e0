use crate::game_tree::{Child, GameTree, Policy};
use crate::games::LevelGame;
use crate::scalar::{argmax_set, spread, uniform, Scalar};

/// Games on which iterated best response is defined.
pub trait HierarchyGame<T: Scalar> {
    type Strategy: Clone + PartialEq;

    /// Uniformly random play.
    fn level0(&self) -> Self::Strategy;

    /// Best response to a weighted mixture of opponent strategies. Weights
    /// sum to one. Exactly tied actions share the mass evenly.
    fn best_response(&self, beliefs: &[(T, &Self::Strategy)]) -> Self::Strategy;

    /// Population mixture of strategies.
    fn mixture(&self, parts: &[(T, &Self::Strategy)]) -> Self::Strategy;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CHParams<T> {
    pub tau: T,
    pub level_cap: usize,
}

impl<T: Scalar> CHParams<T> {
    pub fn new(tau: T) -> Self {
        CHParams { tau, level_cap: 30 }
    }
}

/// `k`-fold best response starting from `level0` (uniform by default).
pub fn level_k_policy<T, G>(game: &G, k: usize, level0: Option<G::Strategy>) -> G::Strategy
where
    T: Scalar,
    G: HierarchyGame<T> + ?Sized,
{
    let mut s = level0.unwrap_or_else(|| game.level0());
    for _ in 0..k {
        s = game.best_response(&[(T::one(), &s)]);
    }
    s
}

/// Levels `0..=max_k` from the uniform level 0.
pub fn level_k_sequence<T, G>(game: &G, max_k: usize) -> Vec<G::Strategy>
where
    T: Scalar,
    G: HierarchyGame<T> + ?Sized,
{
    let mut out = vec![game.level0()];
    for _ in 0..max_k {
        let next = game.best_response(&[(T::one(), out.last().expect("non-empty"))]);
        out.push(next);
    }
    out
}

/// Poisson(`tau`) weights on `0..=cap`, renormalized.
pub fn poisson_weights<T: Scalar>(tau: T, cap: usize) -> Vec<T> {
    if tau <= T::zero() {
        let mut w = vec![T::zero(); cap + 1];
        w[0] = T::one();
        return w;
    }
    let ln_tau = tau.ln();
    let mut log_fact = T::zero();
    let mut w: Vec<T> = (0..=cap)
        .map(|j| {
            if j > 0 {
                log_fact = log_fact + T::from_usize_lossy(j).ln();
            }
            (T::from_usize_lossy(j) * ln_tau - tau - log_fact).exp()
        })
        .collect();
    let s: T = w.iter().copied().sum();
    for x in w.iter_mut() {
        *x = *x / s;
    }
    w
}

const TAIL_TOL: f64 = 1e-13;

/// Poisson cognitive hierarchy: level `k` best responds to the normalized
/// mixture of levels `0..k`; the result is the Poisson-weighted mixture of
/// all levels up to `level_cap`. Levels past the point where the remaining
/// Poisson mass drops below 1e-13 are skipped.
pub fn cognitive_hierarchy_policy<T, G>(game: &G, params: &CHParams<T>) -> G::Strategy
where
    T: Scalar,
    G: HierarchyGame<T> + ?Sized,
{
    let w = poisson_weights(params.tau, params.level_cap);
    // Distinct strategies with accumulated weight.
    let mut pool: Vec<(T, G::Strategy)> = vec![(w[0], game.level0())];
    let mut cum = w[0];
    for &wk in w.iter().skip(1) {
        // the remaining levels cannot move the mixture measurably
        if T::one() - cum < T::lit(TAIL_TOL) {
            break;
        }
        if wk <= T::zero() {
            continue;
        }
        let beliefs: Vec<(T, &G::Strategy)> = pool
            .iter()
            .filter(|(pw, _)| *pw > T::zero())
            .map(|(pw, s)| (*pw / cum, s))
            .collect();
        let br = game.best_response(&beliefs);
        match pool.iter_mut().find(|(_, s)| *s == br) {
            Some(entry) => entry.0 = entry.0 + wk,
            None => pool.push((wk, br)),
        }
        cum = cum + wk;
    }
    let parts: Vec<(T, &G::Strategy)> = pool.iter().map(|(pw, s)| (*pw / cum, s)).collect();
    game.mixture(&parts)
}

fn mix_vectors<T: Scalar>(n: usize, parts: &[(T, &Vec<T>)]) -> Vec<T> {
    let mut out = vec![T::zero(); n];
    for (w, s) in parts {
        for (o, &x) in out.iter_mut().zip(s.iter()) {
            *o = *o + *w * x;
        }
    }
    out
}

impl<'a, T: Scalar> HierarchyGame<T> for dyn LevelGame<T> + 'a {
    type Strategy = Vec<T>;

    fn level0(&self) -> Vec<T> {
        uniform(self.n_actions())
    }

    fn best_response(&self, beliefs: &[(T, &Vec<T>)]) -> Vec<T> {
        let lower = mix_vectors(self.n_actions(), beliefs);
        let u = self.payoffs(&lower);
        spread(u.len(), &argmax_set(&u))
    }

    fn mixture(&self, parts: &[(T, &Vec<T>)]) -> Vec<T> {
        mix_vectors(self.n_actions(), parts)
    }
}

impl<T: Scalar> HierarchyGame<T> for GameTree<T> {
    type Strategy = Policy<T>;

    fn level0(&self) -> Policy<T> {
        self.uniform_policy()
    }

    /// Each player maximizes at their own nodes against the belief mixture,
    /// updating beliefs about which component is playing from the opponent
    /// moves along the history.
    fn best_response(&self, beliefs: &[(T, &Policy<T>)]) -> Policy<T> {
        let n = self.len();
        let m = beliefs.len();
        let comps: Vec<&[Vec<T>]> = beliefs.iter().map(|(_, p)| p.as_slices()).collect();
        let mut out: Vec<Vec<T>> = vec![Vec::new(); n];
        // flat buffers: post[i * m + j] is the weight of component j at node i
        let mut post = vec![T::zero(); n * m];
        let mut value = vec![T::zero(); n];
        let mut q: Vec<T> = Vec::new();
        for player in 0..self.players() {
            if !self.nodes().iter().any(|nd| nd.player == player) {
                continue;
            }
            // Posterior over components at each node (parents precede children).
            for (j, (w, _)) in beliefs.iter().enumerate() {
                post[j] = *w;
            }
            for i in 0..n {
                let node = &self.nodes()[i];
                for (a, c) in node.children.iter().enumerate() {
                    let Child::Node(k) = c else { continue };
                    let (head, tail) = post.split_at_mut(k.0 * m);
                    let src = &head[i * m..i * m + m];
                    let dst = &mut tail[..m];
                    if node.player == player {
                        dst.copy_from_slice(src);
                        continue;
                    }
                    let mut total = T::zero();
                    for j in 0..m {
                        dst[j] = src[j] * comps[j][i][a];
                        total = total + dst[j];
                    }
                    if total > T::zero() {
                        dst.iter_mut().for_each(|x| *x = *x / total);
                    } else {
                        dst.copy_from_slice(src);
                    }
                }
            }
            for i in (0..n).rev() {
                let node = &self.nodes()[i];
                q.clear();
                q.extend(node.children.iter().enumerate().map(|(a, c)| {
                    let base = match c {
                        Child::Terminal(p) => p[player],
                        Child::Node(k) => value[k.0],
                    };
                    if node.player == player {
                        base + node.stage_utility(a)
                    } else {
                        base
                    }
                }));
                if node.player == player {
                    let f = spread(q.len(), &argmax_set(&q));
                    value[i] = f.iter().zip(&q).map(|(x, y)| *x * *y).sum();
                    out[i] = f;
                } else {
                    let w = &post[i * m..i * m + m];
                    let mut v = T::zero();
                    for (a, &qa) in q.iter().enumerate() {
                        let sigma: T = (0..m).map(|j| w[j] * comps[j][i][a]).sum();
                        v = v + sigma * qa;
                    }
                    value[i] = v;
                }
            }
        }
        Policy::new(out)
    }

    /// Behavior strategy of the mixed population: at each node, components
    /// are weighted by how likely they are to reach it through the acting
    /// player's own moves.
    fn mixture(&self, parts: &[(T, &Policy<T>)]) -> Policy<T> {
        let n = self.len();
        let players = self.players();
        let m = parts.len();
        // reach[j][i * players + p]: product of component j's moves by player p on the path to i
        let mut reach: Vec<Vec<T>> = vec![vec![T::one(); n * players]; m];
        let mut out: Vec<Vec<T>> = Vec::with_capacity(n);
        for i in 0..n {
            let node = &self.nodes()[i];
            let p = node.player;
            let ws: Vec<T> = (0..m).map(|j| parts[j].0 * reach[j][i * players + p]).collect();
            let total: T = ws.iter().copied().sum();
            let ws: Vec<T> = if total > T::zero() {
                ws.into_iter().map(|w| w / total).collect()
            } else {
                parts.iter().map(|(w, _)| *w).collect()
            };
            out.push(
                (0..node.num_actions())
                    .map(|a| (0..m).map(|j| ws[j] * parts[j].1.as_slices()[i][a]).sum())
                    .collect(),
            );
            for (a, c) in node.children.iter().enumerate() {
                let Child::Node(k) = c else { continue };
                for (j, r) in reach.iter_mut().enumerate() {
                    for q in 0..players {
                        let mut v = r[i * players + q];
                        if q == p {
                            v = v * parts[j].1.as_slices()[i][a];
                        }
                        r[k.0 * players + q] = v;
                    }
                }
            }
        }
        Policy::new(out)
    }
}
