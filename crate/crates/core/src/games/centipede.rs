use crate::game_tree::{build_tree, ChildDesc, GameTree, NodeDesc};
use crate::games::GameError;
use crate::scalar::Scalar;

/// Centipede game with an alternating take/pass structure. At move `i`
/// (1-based) the pot holds a large pile of `0.40 * 2^(i-1)` dollars and a
/// small pile of `0.10 * 2^(i-1)`; taking gives the mover the large pile.
/// Passing at the last move hands out the next (doubled) piles, large pile
/// to the player who would have moved next.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CentipedeSpec {
    pub moves: usize,
}

const LARGE: f64 = 0.40;
const SMALL: f64 = 0.10;

/// Payoffs `(player 1, player 2)` when the pot is split at move `i`.
fn split(i: usize) -> [f64; 2] {
    let scale = 2f64.powi(i as i32 - 1);
    let (large, small) = (LARGE * scale, SMALL * scale);
    if i % 2 == 1 {
        [large, small]
    } else {
        [small, large]
    }
}

pub fn build_centipede<T: Scalar>(spec: CentipedeSpec) -> Result<GameTree<T>, GameError> {
    if spec.moves != 4 && spec.moves != 6 {
        return Err(GameError::InvalidSpec(format!(
            "centipede supports 4 or 6 moves, got {}",
            spec.moves
        )));
    }
    let n = spec.moves;
    let actions = vec!["take".to_string(), "pass".to_string()];
    let pay = |i: usize| ChildDesc::Payoff(split(i).iter().map(|&x| T::lit(x)).collect());
    let descs = (1..=n)
        .map(|i| {
            let pass = if i < n { ChildDesc::Node(i) } else { pay(n + 1) };
            NodeDesc::new(i - 1, (i - 1) % 2, actions.clone(), vec![pay(i), pass])
        })
        .collect();
    Ok(build_tree(descs, 2)?)
}

/// Outcome labels in leaf order: `take1 .. take{n}`, then `pass`.
pub fn centipede_outcome_labels(moves: usize) -> Vec<String> {
    (1..=moves)
        .map(|i| format!("take{i}"))
        .chain(std::iter::once("pass".to_string()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game_tree::{expected_payoff, Child, NodeId, Policy};

    #[test]
    fn four_move_schedule() {
        let t = build_centipede::<f64>(CentipedeSpec { moves: 4 }).unwrap();
        let leaves: Vec<Vec<f64>> = t.leaves().map(|(_, _, p)| p.to_vec()).collect();
        let expected = [[0.4, 0.1], [0.2, 0.8], [1.6, 0.4], [0.8, 3.2], [6.4, 1.6]];
        assert_eq!(leaves.len(), 5);
        for (got, want) in leaves.iter().zip(expected) {
            assert!((got[0] - want[0]).abs() < 1e-12 && (got[1] - want[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn take_first_pays_point_four() {
        let t = build_centipede::<f64>(CentipedeSpec { moves: 4 }).unwrap();
        let p = Policy::new(vec![vec![1.0, 0.0]; 4]);
        assert!((expected_payoff(&t, &p, 0).unwrap() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn six_move_second_take() {
        let t = build_centipede::<f64>(CentipedeSpec { moves: 6 }).unwrap();
        match &t.node(NodeId(1)).children[0] {
            Child::Terminal(p) => assert!((p[1] - 0.8).abs() < 1e-12),
            _ => panic!("take ends the game"),
        }
    }

    #[test]
    fn all_pass_under_uniform() {
        let t = build_centipede::<f64>(CentipedeSpec { moves: 4 }).unwrap();
        let d = t.leaf_distribution(&t.uniform_policy()).unwrap();
        assert!((d[4] - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn four_is_prefix_of_six() {
        let t4 = build_centipede::<f64>(CentipedeSpec { moves: 4 }).unwrap();
        let t6 = build_centipede::<f64>(CentipedeSpec { moves: 6 }).unwrap();
        for i in 0..4 {
            let (a, b) = (t4.node(NodeId(i)), t6.node(NodeId(i)));
            assert_eq!(a.player, b.player);
            assert_eq!(a.children[0], b.children[0]);
        }
        let Child::Terminal(final_pass) = &t4.node(NodeId(3)).children[1] else {
            panic!()
        };
        let Child::Terminal(take5) = &t6.node(NodeId(4)).children[0] else {
            panic!()
        };
        assert_eq!(final_pass, take5);
    }

    #[test]
    fn labels() {
        assert_eq!(centipede_outcome_labels(4), ["take1", "take2", "take3", "take4", "pass"]);
    }
}
