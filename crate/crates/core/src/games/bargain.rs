use crate::game_tree::{build_tree, ChildDesc, GameTree, NodeDesc};
use crate::games::GameError;
use crate::scalar::Scalar;

/// Largest integer request; requests run over `0..=BARGAIN_GRID`.
pub const BARGAIN_GRID: usize = 100;

const PIE: f64 = 100.0;

/// Sequential bargaining over a pie of 100.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BargainSpec {
    /// One offer; refusal pays `(v1, v2)`.
    Ultimatum { v1: f64, v2: f64 },
    /// Refusal opens a counteroffer `y` by player 2 with payoffs shrunk by
    /// `d`; a second refusal pays nothing.
    TwoStage { d: f64 },
}

fn requests() -> Vec<String> {
    (0..=BARGAIN_GRID).map(|x| x.to_string()).collect()
}

/// Responder actions; refusal comes first so that exact indifference
/// resolves to refusal under lowest-index tie-breaking.
fn responses() -> Vec<String> {
    vec!["reject".to_string(), "accept".to_string()]
}

/// Rounds to 1e-9 so discounted amounts equal their decimal values
/// (`0.9 * 99` is otherwise `89.10000000000001`).
fn snap(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

fn payoff<T: Scalar>(a: f64, b: f64) -> ChildDesc<T> {
    ChildDesc::Payoff(vec![T::lit(a), T::lit(b)])
}

/// Player 1 (index 0) requests `x`; player 2 accepts or rejects.
pub fn build_bargain<T: Scalar>(spec: BargainSpec) -> Result<GameTree<T>, GameError> {
    let grid = BARGAIN_GRID;
    let mut descs = Vec::new();
    descs.push(NodeDesc::new(0, 0, requests(), (1..=grid + 1).map(ChildDesc::Node).collect()));
    match spec {
        BargainSpec::Ultimatum { v1, v2 } => {
            let ok = |v: f64| (0.0..=PIE).contains(&v);
            if !ok(v1) || !ok(v2) {
                return Err(GameError::InvalidRejectionPayoffs { v1, v2 });
            }
            for x in 0..=grid {
                let x_f = x as f64;
                descs.push(NodeDesc::new(
                    x + 1,
                    1,
                    responses(),
                    vec![payoff(v1, v2), payoff(x_f, PIE - x_f)],
                ));
            }
        }
        BargainSpec::TwoStage { d } => {
            if !(d > 0.0 && d <= 1.0) {
                return Err(GameError::InvalidSpec(format!(
                    "disagreement penalty must lie in (0, 1], got {d}"
                )));
            }
            let counter_base = grid + 2;
            let answer_base = counter_base + grid + 1;
            for x in 0..=grid {
                let x_f = x as f64;
                descs.push(NodeDesc::new(
                    x + 1,
                    1,
                    responses(),
                    vec![ChildDesc::Node(counter_base + x), payoff(x_f, PIE - x_f)],
                ));
                let answers = (0..=grid).map(|y| ChildDesc::Node(answer_base + x * (grid + 1) + y)).collect();
                descs.push(NodeDesc::new(counter_base + x, 1, requests(), answers));
                for y in 0..=grid {
                    let y_f = y as f64;
                    descs.push(NodeDesc::new(
                        answer_base + x * (grid + 1) + y,
                        0,
                        responses(),
                        vec![payoff(0.0, 0.0), payoff(snap(d * y_f), snap(d * (PIE - y_f)))],
                    ));
                }
            }
        }
    }
    Ok(build_tree(descs, 2)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game_tree::{Child, NodeId};

    #[test]
    fn ultimatum_shape() {
        let t = build_bargain::<f64>(BargainSpec::Ultimatum { v1: 10.0, v2: 10.0 }).unwrap();
        assert_eq!(t.len(), 102);
        assert_eq!(t.node(NodeId(0)).num_actions(), 101);
        // request 40 leaves 60 for the responder, above the rejection payoff
        let Child::Terminal(acc) = &t.node(NodeId(41)).children[1] else {
            panic!()
        };
        assert_eq!(acc, &vec![40.0, 60.0]);
    }

    #[test]
    fn two_stage_shape() {
        let t = build_bargain::<f64>(BargainSpec::TwoStage { d: 0.9 }).unwrap();
        assert_eq!(t.len(), 1 + 101 + 101 + 101 * 101);
        assert_eq!(t.height(), 4);
    }

    #[test]
    fn invalid_rejection_payoffs() {
        assert!(matches!(
            build_bargain::<f64>(BargainSpec::Ultimatum { v1: -1.0, v2: 10.0 }),
            Err(GameError::InvalidRejectionPayoffs { .. })
        ));
        assert!(build_bargain::<f64>(BargainSpec::TwoStage { d: 0.0 }).is_err());
    }
}
