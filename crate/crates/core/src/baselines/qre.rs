use crate::game_tree::{Child, GameTree, NodeId, Policy};
use crate::scalar::{normalize_log_weights, uniform, Scalar};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QREParams<T> {
    pub lambda: T,
    pub max_iters: usize,
    pub fp_tol: T,
    /// Initial damping; halved whenever the residual stops improving.
    pub damping: T,
}

impl<T: Scalar> QREParams<T> {
    pub fn new(lambda: T) -> Self {
        QREParams {
            lambda,
            max_iters: 10_000,
            fp_tol: T::lit(1e-10),
            damping: T::lit(0.5),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QREResult<T> {
    pub strategy: Vec<T>,
    pub converged: bool,
    pub iterations: usize,
    /// `max |logit(p) - p|` at the returned point.
    pub residual: T,
}

/// Plain softmax of `lambda * u`.
pub fn logit_response<T: Scalar>(u: &[T], lambda: T) -> Vec<T> {
    let mut s: Vec<T> = u.iter().map(|&x| lambda * x).collect();
    normalize_log_weights(&mut s);
    s
}

fn max_diff<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| (*x - *y).abs()).fold(T::zero(), T::max)
}

const STALL_WINDOW: usize = 10;

/// Damped fixed-point iteration `p <- p + d (logit(U(p)) - p)` from the
/// uniform point. Non-convergence is reported through the flag.
///
/// Two-action games are solved by bisection on the first action's
/// probability instead: `p - logit(U(p))_0` is non-positive at 0 and
/// non-negative at 1, so a fixed point is always bracketed, and the damped
/// iteration can cycle there when payoffs fall steeply in `p`.
pub fn logit_qre_fixed_point<T, F>(n_actions: usize, payoffs: F, params: &QREParams<T>) -> QREResult<T>
where
    T: Scalar,
    F: Fn(&[T]) -> Vec<T>,
{
    if n_actions == 2 {
        return bisect_two_actions(payoffs, params);
    }
    let min_damping = T::lit(1e-6);
    let mut p = uniform::<T>(n_actions);
    let mut damping = params.damping;
    let mut best = T::infinity();
    let mut stalled = 0;
    let mut residual = T::infinity();
    for it in 0..params.max_iters.max(1) {
        let r = logit_response(&payoffs(&p), params.lambda);
        residual = max_diff(&r, &p);
        if residual < params.fp_tol {
            return QREResult {
                strategy: p,
                converged: true,
                iterations: it,
                residual,
            };
        }
        // halve the step only once progress has stalled, so transient
        // rises do not shrink it for good
        if residual < best {
            best = residual;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= STALL_WINDOW {
                damping = (damping * T::lit(0.5)).max(min_damping);
                best = residual;
                stalled = 0;
            }
        }
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = *pi + damping * (*ri - *pi);
        }
    }
    QREResult {
        strategy: p,
        converged: false,
        iterations: params.max_iters,
        residual,
    }
}

fn bisect_two_actions<T, F>(payoffs: F, params: &QREParams<T>) -> QREResult<T>
where
    T: Scalar,
    F: Fn(&[T]) -> Vec<T>,
{
    let gap = |x: T| x - logit_response(&payoffs(&[x, T::one() - x]), params.lambda)[0];
    let (mut lo, mut hi) = (T::zero(), T::one());
    let mut iterations = 0;
    // the interval halves each step; stop at the scalar's resolution
    while iterations < params.max_iters.max(1) && hi - lo > T::epsilon() {
        let mid = T::lit(0.5) * (lo + hi);
        if gap(mid) > T::zero() {
            hi = mid;
        } else {
            lo = mid;
        }
        iterations += 1;
    }
    let converged = hi - lo <= T::epsilon();
    let x = T::lit(0.5) * (lo + hi);
    let p = vec![x, T::one() - x];
    let residual = max_diff(&logit_response(&payoffs(&p), params.lambda), &p);
    QREResult {
        strategy: p,
        converged,
        iterations,
        residual,
    }
}

/// Agent-form logit QRE on a finite tree: every node logit-responds with
/// precision `lambda` to the continuation values of logit play below it.
pub fn agent_qre<T: Scalar>(tree: &GameTree<T>, params: &QREParams<T>) -> Policy<T> {
    let mut probs = vec![Vec::new(); tree.len()];
    visit(tree, tree.root(), params.lambda, &mut probs);
    Policy::new(probs)
}

fn visit<T: Scalar>(tree: &GameTree<T>, id: NodeId, lambda: T, probs: &mut [Vec<T>]) -> Vec<T> {
    let node = tree.node(id);
    let q: Vec<Vec<T>> = node
        .children
        .iter()
        .enumerate()
        .map(|(a, c)| {
            let mut v = match c {
                Child::Terminal(p) => p.clone(),
                Child::Node(k) => visit(tree, *k, lambda, probs),
            };
            v[node.player] = v[node.player] + node.stage_utility(a);
            v
        })
        .collect();
    let own: Vec<T> = q.iter().map(|v| v[node.player]).collect();
    let f = logit_response(&own, lambda);
    let mut value = vec![T::zero(); tree.players()];
    for (fa, qa) in f.iter().zip(&q) {
        for (v, &x) in value.iter_mut().zip(qa) {
            *v = *v + *fa * x;
        }
    }
    probs[id.0] = f;
    value
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game_tree::{build_tree, ChildDesc, NodeDesc};

    #[test]
    fn zero_precision_is_uniform() {
        let r = logit_qre_fixed_point(3, |p: &[f64]| vec![p[0], 2.0 * p[1], 1.0], &QREParams::new(0.0));
        assert!(r.converged);
        assert!(r.strategy.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn constant_payoffs_give_softmax() {
        let r = logit_qre_fixed_point(2, |_: &[f64]| vec![1.0, 0.0], &QREParams::new(2.0));
        let e = 2f64.exp();
        assert!(r.converged);
        assert!((r.strategy[0] - e / (e + 1.0)).abs() < 1e-9);
    }

    #[test]
    fn steep_map_still_converges() {
        // Slope around 800 at the fixed point.
        let lambda = 84.0;
        let payoffs = |p: &[f64]| vec![1.0 + 2.0 * (10.0 - 20.0 * p[0]), 1.0];
        let params = QREParams::new(lambda);
        let r = logit_qre_fixed_point(2, payoffs, &params);
        assert!(r.converged);
        let again = logit_response(&payoffs(&r.strategy), lambda);
        assert!((again[0] - r.strategy[0]).abs() < 10.0 * params.fp_tol);
    }

    #[test]
    fn two_level_logit_backup() {
        let leaf = |a: f64, b: f64| ChildDesc::Payoff(vec![a, b]);
        let acts = vec!["l".to_string(), "r".to_string()];
        let t = build_tree(
            vec![
                NodeDesc::new(0, 0, acts.clone(), vec![ChildDesc::Node(1), leaf(1.0, 1.0)]),
                NodeDesc::new(1, 1, acts, vec![leaf(3.0, 0.0), leaf(0.0, 2.0)]),
            ],
            2,
        )
        .unwrap();
        let lambda = 2.0;
        let p = agent_qre(&t, &QREParams::new(lambda));
        let e = (2.0 * lambda).exp();
        let f2 = [1.0 / (1.0 + e), e / (1.0 + e)];
        let v1 = 3.0 * f2[0];
        let z = (lambda * v1).exp() + lambda.exp();
        assert!((p.get(NodeId(1))[0] - f2[0]).abs() < 1e-15);
        assert!((p.get(NodeId(0))[0] - (lambda * v1).exp() / z).abs() < 1e-15);
    }
}
