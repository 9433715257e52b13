//! Conjugate Bayesian linear regression per arm and its Thompson step.
//!
//! Each arm keeps a normal–inverse-gamma posterior over ridge-regression
//! weights (context plus trailing intercept): precision `Λ`, mean `μ`,
//! inverse-gamma shape `a` and scale `b`. Updates are the standard
//! recursion
//!
//! ```text
//! Λ' = Λ + x xᵀ        μ' = Λ'⁻¹ (Σ x y)
//! a' = a0 + n/2        b' = b0 + (Σ y² − μ'ᵀ Λ' μ') / 2
//! ```
//!
//! so the state after any update order equals the batch posterior over all
//! observations. Acting samples `σ² ~ InvGamma(a, b)`, then weights from
//! `N(μ, σ² Λ⁻¹)` per arm, and plays the arm with the highest sampled
//! predicted reward.

use rand::Rng;
use thiserror::Error;

use crate::num::Scalar;
use crate::rng::{draw_gamma, draw_standard_normal};
use crate::types::DrugId;

#[derive(Debug, Clone, Error)]
pub enum PosteriorError {
    #[error("posterior precision matrix is not positive definite (update bug?)")]
    NotPositiveDefinite,
    #[error("non-finite observation passed to posterior update")]
    NonFiniteInput,
}

/// Normal–inverse-gamma posterior for one arm.
#[derive(Debug, Clone)]
pub struct NigPosterior<S: Scalar> {
    dim: usize,
    /// Λ, row-major dim × dim; symmetric positive definite.
    precision: Vec<S>,
    /// Σ x·y (the prior mean is zero, so this is the full right-hand side).
    xty: Vec<S>,
    /// μ = Λ⁻¹ Σ x·y, refreshed on every update.
    mean: Vec<S>,
    sum_yy: S,
    shape: S,
    scale: S,
    count: usize,
    ridge: S,
    prior_shape: S,
    prior_scale: S,
}

impl<S: Scalar> NigPosterior<S> {
    /// Fresh prior: `Λ = ridge·I`, `μ = 0`, `a = a0`, `b = b0`.
    /// `dim` includes the trailing intercept.
    pub fn new(dim: usize, ridge: S, a0: S, b0: S) -> NigPosterior<S> {
        assert!(dim >= 1);
        assert!(ridge > S::zero() && a0 > S::zero() && b0 > S::zero());
        let mut precision = vec![S::zero(); dim * dim];
        for i in 0..dim {
            precision[i * dim + i] = ridge;
        }
        NigPosterior {
            dim,
            precision,
            xty: vec![S::zero(); dim],
            mean: vec![S::zero(); dim],
            sum_yy: S::zero(),
            shape: a0,
            scale: b0,
            count: 0,
            ridge,
            prior_shape: a0,
            prior_scale: b0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> &[S] {
        &self.mean
    }

    pub fn precision(&self) -> &[S] {
        &self.precision
    }

    pub fn shape(&self) -> S {
        self.shape
    }

    pub fn scale(&self) -> S {
        self.scale
    }

    pub fn ridge(&self) -> S {
        self.ridge
    }

    pub fn prior_shape(&self) -> S {
        self.prior_shape
    }

    pub fn prior_scale(&self) -> S {
        self.prior_scale
    }

    /// Folds one observation `(x, y)` into the posterior. `x` must carry the
    /// trailing intercept and match `dim`.
    pub fn update(&mut self, x: &[S], y: S) -> Result<(), PosteriorError> {
        self.fold_observation(x, y)?;
        self.refresh()
    }

    /// Accumulates the sufficient statistics of one observation without
    /// refreshing `μ`, `a`, `b`. Call [`NigPosterior::refresh`] before using
    /// the posterior again; batch rebuilds fold everything first.
    pub fn fold_observation(&mut self, x: &[S], y: S) -> Result<(), PosteriorError> {
        assert_eq!(x.len(), self.dim, "observation dimension mismatch");
        if !y.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(PosteriorError::NonFiniteInput);
        }
        let n = self.dim;
        for i in 0..n {
            for j in 0..n {
                self.precision[i * n + j] += x[i] * x[j];
            }
        }
        for i in 0..n {
            self.xty[i] += x[i] * y;
        }
        self.sum_yy += y * y;
        self.count += 1;
        Ok(())
    }

    /// Recomputes `μ`, `a`, `b` from the accumulated statistics.
    pub fn refresh(&mut self) -> Result<(), PosteriorError> {
        let n = self.dim;
        let chol = cholesky(&self.precision, n).ok_or(PosteriorError::NotPositiveDefinite)?;
        self.mean = chol_solve(&chol, n, &self.xty);
        self.shape = self.prior_shape + S::of(self.count as f64 / 2.0);
        let fit: S = self.mean.iter().zip(&self.xty).map(|(m, v)| *m * *v).sum();
        self.scale = self.prior_scale + (self.sum_yy - fit) / S::of(2.0);
        Ok(())
    }

    /// One Thompson draw of the predicted reward for context `x` (with
    /// intercept): `σ² ~ InvGamma(a, b)`, `β ~ N(μ, σ²Λ⁻¹)`, returns `βᵀx`.
    pub fn sample_prediction(&self, x: &[S], rng: &mut impl Rng) -> Result<S, PosteriorError> {
        assert_eq!(x.len(), self.dim);
        let n = self.dim;
        let chol = cholesky(&self.precision, n).ok_or(PosteriorError::NotPositiveDefinite)?;
        // Gamma(shape a, scale 1/b) has rate b; its inverse is InvGamma(a, b).
        let variance = S::one() / draw_gamma(self.shape, S::one() / self.scale, rng);
        let sigma = variance.sqrt();
        let z: Vec<S> = (0..n).map(|_| draw_standard_normal(rng)).collect();
        let spread = solve_transposed(&chol, n, &z);
        let mut score = S::zero();
        for i in 0..n {
            score += (self.mean[i] + sigma * spread[i]) * x[i];
        }
        Ok(score)
    }

    /// Posterior-mean prediction for `x` (with intercept).
    pub fn mean_prediction(&self, x: &[S]) -> S {
        self.mean.iter().zip(x).map(|(m, v)| *m * *v).sum()
    }
}

/// Thompson step over per-arm posteriors: sample each arm's predicted reward
/// for `x` (intercept appended here) and play the argmax, ties lowest index.
pub fn nig_thompson_act<S: Scalar>(
    posteriors: &[NigPosterior<S>],
    x: &[S],
    rng: &mut impl Rng,
) -> Result<DrugId, PosteriorError> {
    assert!(!posteriors.is_empty());
    let x_tilde = with_intercept(x);
    let mut scores = Vec::with_capacity(posteriors.len());
    for p in posteriors {
        scores.push(p.sample_prediction(&x_tilde, rng)?);
    }
    Ok(DrugId(crate::num::argmax(&scores)))
}

/// Appends the intercept term.
pub fn with_intercept<S: Scalar>(x: &[S]) -> Vec<S> {
    let mut out = Vec::with_capacity(x.len() + 1);
    out.extend_from_slice(x);
    out.push(S::one());
    out
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix
/// (row-major). Returns `None` when the matrix is not positive definite.
pub(crate) fn cholesky<S: Scalar>(a: &[S], n: usize) -> Option<Vec<S>> {
    let mut l = vec![S::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= S::zero() || !sum.is_finite() {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Solves `L Lᵀ x = b` given the Cholesky factor.
pub(crate) fn chol_solve<S: Scalar>(l: &[S], n: usize, b: &[S]) -> Vec<S> {
    let mut y = vec![S::zero(); n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i * n + k] * y[k];
        }
        y[i] = sum / l[i * n + i];
    }
    let mut x = vec![S::zero(); n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in (i + 1)..n {
            sum -= l[k * n + i] * x[k];
        }
        x[i] = sum / l[i * n + i];
    }
    x
}

/// Solves `Lᵀ w = z`; `w` then has covariance `(L Lᵀ)⁻¹` when `z` is
/// standard normal.
fn solve_transposed<S: Scalar>(l: &[S], n: usize, z: &[S]) -> Vec<S> {
    let mut w = vec![S::zero(); n];
    for i in (0..n).rev() {
        let mut sum = z[i];
        for k in (i + 1)..n {
            sum -= l[k * n + i] * w[k];
        }
        w[i] = sum / l[i * n + i];
    }
    w
}
