use crate::games::{GameError, LevelGame};
use crate::scalar::{uniform, Scalar};

/// p-beauty contest over an integer guess grid `0..=grid_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct BeautySpec {
    pub p: f64,
    pub grid_max: usize,
}

impl Default for BeautySpec {
    fn default() -> Self {
        BeautySpec {
            p: 2.0 / 3.0,
            grid_max: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BeautyGame<T> {
    p: T,
    n: usize,
    depth_cap: Option<usize>,
}

pub fn build_beauty<T: Scalar>(spec: &BeautySpec) -> Result<BeautyGame<T>, GameError> {
    if !(spec.p > 0.0 && spec.p < 1.0) {
        return Err(GameError::InvalidSpec(format!("p must lie in (0, 1), got {}", spec.p)));
    }
    if spec.grid_max == 0 {
        return Err(GameError::InvalidSpec("guess grid must have at least two points".into()));
    }
    Ok(BeautyGame {
        p: T::lit(spec.p),
        n: spec.grid_max + 1,
        depth_cap: None,
    })
}

impl<T: Scalar> BeautyGame<T> {
    pub fn p(&self) -> T {
        self.p
    }

    pub fn with_depth_cap(mut self, cap: Option<usize>) -> Self {
        self.depth_cap = cap;
        self
    }

    /// `p` times the mean guess of the lower level.
    pub fn target(&self, lower: &[T]) -> T {
        let mean: T = lower
            .iter()
            .enumerate()
            .map(|(a, &w)| T::from_usize_lossy(a) * w)
            .sum();
        self.p * mean
    }
}

impl<T: Scalar> LevelGame<T> for BeautyGame<T> {
    fn n_actions(&self) -> usize {
        self.n
    }

    fn action_labels(&self) -> Vec<String> {
        (0..self.n).map(|a| a.to_string()).collect()
    }

    fn prior(&self) -> Vec<T> {
        uniform(self.n)
    }

    /// Negated distance to the target.
    fn payoffs(&self, lower: &[T]) -> Vec<T> {
        let g = self.target(lower);
        (0..self.n).map(|a| -(T::from_usize_lossy(a) - g).abs()).collect()
    }

    fn depth_cap(&self) -> Option<usize> {
        self.depth_cap
    }

    fn nash(&self) -> Vec<T> {
        let mut v = vec![T::zero(); self.n];
        v[0] = T::one();
        v
    }
}
