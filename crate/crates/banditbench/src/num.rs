//! Scalar abstraction for the numeric core.
//!
//! Every score, reward, posterior, and network weight in this crate is
//! generic over [`Scalar`], so the whole pipeline can run in `f32` or `f64`.
//! The benchmark defaults to `f64` (see the aliases at the crate root);
//! `f32` is available for memory-bound experiments.
//!
//! Random draws are always generated in `f64` and then converted, so a given
//! seed consumes the generator stream identically for every scalar type.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{AsPrimitive, Float, NumAssignOps};

/// Floating-point scalar usable throughout the numeric core.
pub trait Scalar:
    Float + NumAssignOps + AsPrimitive<f64> + Sum<Self> + Display + Debug + Send + Sync + 'static
{
    /// Converts an `f64` constant into this scalar type.
    fn of(v: f64) -> Self;
}

impl Scalar for f32 {
    #[inline]
    fn of(v: f64) -> f32 {
        v as f32
    }
}

impl Scalar for f64 {
    #[inline]
    fn of(v: f64) -> f64 {
        v
    }
}

/// Median of a slice, defined as the mean of the two central order
/// statistics for even lengths.
///
/// Panics on an empty slice; callers validate non-emptiness at ingest.
pub fn median<S: Scalar>(values: &[S]) -> S {
    assert!(!values.is_empty(), "median of empty slice");
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("non-finite value in median"));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / S::of(2.0)
    }
}

/// Index of the maximum value, ties broken by lowest index.
pub fn argmax<S: Scalar>(values: &[S]) -> usize {
    assert!(!values.is_empty(), "argmax of empty slice");
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Index of the minimum value, ties broken by lowest index.
pub fn argmin<S: Scalar>(values: &[S]) -> usize {
    assert!(!values.is_empty(), "argmin of empty slice");
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v < values[best] {
            best = i;
        }
    }
    best
}
