//! Scalar abstraction shared by the solvers, plus the log-domain helpers
//! every logit rule in the crate goes through.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point type the game solvers are generic over.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal; every supported scalar can represent one
    /// (possibly with rounding).
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `log(sum(exp(xs)))`, stable for large magnitudes. Returns `-inf` for an
/// empty slice or when every entry is `-inf`.
pub fn log_sum_exp<T: Scalar>(xs: &[T]) -> T {
    let max = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return max;
    }
    let sum: T = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Normalizes log-weights into a probability vector in place and returns the
/// log normalizer.
pub fn normalize_log_weights<T: Scalar>(scores: &mut [T]) -> T {
    let log_z = log_sum_exp(scores);
    for s in scores.iter_mut() {
        *s = (*s - log_z).exp();
    }
    log_z
}

/// Uniform distribution over `n` outcomes.
pub fn uniform<T: Scalar>(n: usize) -> Vec<T> {
    vec![T::one() / T::from_usize_lossy(n); n]
}

/// Indices whose value is within a relative tolerance of the maximum.
pub(crate) fn argmax_set<T: Scalar>(values: &[T]) -> Vec<usize> {
    let max = values.iter().copied().fold(T::neg_infinity(), T::max);
    let scale = T::one().max(max.abs());
    let tol = T::lit(1e-12) * scale;
    values
        .iter()
        .enumerate()
        .filter(|(_, &v)| max - v <= tol)
        .map(|(i, _)| i)
        .collect()
}

/// Distribution splitting mass evenly over `support`.
pub(crate) fn spread<T: Scalar>(n: usize, support: &[usize]) -> Vec<T> {
    let mut out = vec![T::zero(); n];
    let w = T::one() / T::from_usize_lossy(support.len());
    for &i in support {
        out[i] = w;
    }
    out
}

/// Index of the largest entry; ties go to the lowest index.
pub fn mode<T: Scalar>(probs: &[T]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    best
}
