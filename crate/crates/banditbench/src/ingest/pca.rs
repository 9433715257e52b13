//! Principal-components fallback reducer for synthetic cohorts.
//!
//! Real cohorts arrive with a precomputed embedding; this reducer exists so
//! synthetic experiments can exercise arbitrary widths without an upstream
//! embedding step. Mean-centered projection onto the top principal
//! components, eigenvalues in non-increasing order.

use super::{FeatureTable, IngestError};
use crate::num::Scalar;

/// Reduced table plus the variance captured by each retained component.
#[derive(Debug, Clone)]
pub struct PcaResult<S: Scalar> {
    pub features: FeatureTable<S>,
    /// Component variances, non-increasing.
    pub explained_variance: Vec<S>,
    /// Retained components, one row per component (dim × width).
    pub components: Vec<Vec<S>>,
    /// Column means removed before projection.
    pub mean: Vec<S>,
}

/// Projects `feats` onto its top `dim` principal components.
pub fn pca_reduce<S: Scalar>(feats: &FeatureTable<S>, dim: usize) -> Result<PcaResult<S>, IngestError> {
    let width = feats.width();
    if dim > width {
        return Err(IngestError::DimTooLarge { dim, width });
    }
    let n = feats.len();
    assert!(n > 0, "cannot reduce an empty feature table");

    // Column means.
    let mut mean = vec![S::zero(); width];
    for row in feats.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += *v;
        }
    }
    let inv_n = S::one() / S::of(n as f64);
    for m in &mut mean {
        *m *= inv_n;
    }

    // Covariance of centered columns (sample convention, n - 1).
    let denom = if n > 1 { S::of((n - 1) as f64) } else { S::one() };
    let mut cov = vec![vec![S::zero(); width]; width];
    for row in feats.rows() {
        let centered: Vec<S> = row.iter().zip(&mean).map(|(v, m)| *v - *m).collect();
        for i in 0..width {
            for j in i..width {
                cov[i][j] += centered[i] * centered[j];
            }
        }
    }
    for i in 0..width {
        for j in i..width {
            cov[i][j] = cov[i][j] / denom;
            cov[j][i] = cov[i][j];
        }
    }

    let (mut eigenvalues, mut vectors) = jacobi_eigen(cov);

    // Order components by variance, descending; fix each sign so the entry
    // of largest magnitude is positive (keeps projections deterministic).
    let mut order: Vec<usize> = (0..width).collect();
    order.sort_by(|&a, &b| eigenvalues[b].partial_cmp(&eigenvalues[a]).expect("finite eigenvalues"));
    eigenvalues = order.iter().map(|&i| eigenvalues[i].max(S::zero())).collect();
    vectors = order.iter().map(|&i| std::mem::take(&mut vectors[i])).collect();
    for v in &mut vectors {
        let mut pivot = 0;
        for (i, x) in v.iter().enumerate() {
            if x.abs() > v[pivot].abs() {
                pivot = i;
            }
        }
        if v[pivot] < S::zero() {
            for x in v.iter_mut() {
                *x = -*x;
            }
        }
    }

    let components: Vec<Vec<S>> = vectors.into_iter().take(dim).collect();
    let explained_variance: Vec<S> = eigenvalues.into_iter().take(dim).collect();

    let entries = feats
        .units()
        .iter()
        .zip(feats.rows())
        .map(|(unit, row)| {
            let centered: Vec<S> = row.iter().zip(&mean).map(|(v, m)| *v - *m).collect();
            let projected = components
                .iter()
                .map(|c| c.iter().zip(&centered).map(|(a, b)| *a * *b).sum())
                .collect();
            (unit.clone(), projected)
        })
        .collect();

    Ok(PcaResult {
        features: FeatureTable::new(entries)?,
        explained_variance,
        components,
        mean,
    })
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Returns (eigenvalues, eigenvectors) with `eigenvectors[i]` the unit
/// eigenvector for `eigenvalues[i]`, unordered.
fn jacobi_eigen<S: Scalar>(mut a: Vec<Vec<S>>) -> (Vec<S>, Vec<Vec<S>>) {
    let n = a.len();
    let mut v = vec![vec![S::zero(); n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = S::one();
    }
    if n <= 1 {
        let values = a.iter().enumerate().map(|(i, r)| r[i]).collect();
        return (values, v);
    }

    let frob: S = a
        .iter()
        .flat_map(|r| r.iter())
        .map(|x| *x * *x)
        .sum::<S>()
        .sqrt();
    let tol = (S::epsilon() * frob).max(S::min_positive_value());

    for _sweep in 0..100 {
        let mut off = S::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[i][j] * a[i][j];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() <= tol * S::of(1e-3) {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (S::of(2.0) * a[p][q]);
                let t = {
                    let sign = if theta < S::zero() { -S::one() } else { S::one() };
                    sign / (theta.abs() + (theta * theta + S::one()).sqrt())
                };
                let c = S::one() / (t * t + S::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[p][k];
                    let vkq = v[q][k];
                    v[p][k] = c * vkp - s * vkq;
                    v[q][k] = s * vkp + c * vkq;
                }
            }
        }
    }

    let values = a.iter().enumerate().map(|(i, r)| r[i]).collect();
    (values, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    use crate::rng::{derive_stream, RngSeed};

    fn random_table(n: usize, width: usize, seed: u64) -> FeatureTable<f64> {
        let mut rng = derive_stream(RngSeed(seed), "pca-test");
        let entries = (0..n)
            .map(|i| {
                // Correlated columns so the spectrum is interesting.
                let base: f64 = rng.random_range(-1.0..1.0);
                let row: Vec<f64> = (0..width)
                    .map(|j| base * (j as f64 + 1.0) + rng.random_range(-0.5..0.5))
                    .collect();
                (format!("u{i:03}"), row)
            })
            .collect();
        FeatureTable::new(entries).unwrap()
    }

    #[test]
    fn full_rank_projection_reconstructs_centered_data() {
        let table = random_table(40, 5, 7);
        let out = pca_reduce(&table, 5).unwrap();
        for (unit, row) in table.units().iter().zip(table.rows()) {
            let centered: Vec<f64> = row.iter().zip(&out.mean).map(|(v, m)| v - m).collect();
            let scores = out.features.row(unit).unwrap();
            for (j, want) in centered.iter().enumerate() {
                let got: f64 = out.components.iter().zip(scores).map(|(c, s)| c[j] * s).sum();
                assert!((got - want).abs() < 1e-8, "unit {unit} col {j}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn explained_variances_non_increasing() {
        let table = random_table(60, 6, 11);
        let out = pca_reduce(&table, 6).unwrap();
        for pair in out.explained_variance.windows(2) {
            assert!(pair[0] >= pair[1] - 1e-12, "variances out of order: {pair:?}");
        }
    }

    #[test]
    fn projection_is_idempotent_in_the_retained_subspace() {
        let table = random_table(50, 6, 13);
        let once = pca_reduce(&table, 3).unwrap();
        let twice = pca_reduce(&once.features, 3).unwrap();
        for unit in table.units() {
            let a = once.features.row(unit).unwrap();
            let b = twice.features.row(unit).unwrap();
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-8, "unit {unit}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn dim_larger_than_width_is_an_error() {
        let table = random_table(10, 3, 17);
        assert!(matches!(pca_reduce(&table, 4), Err(IngestError::DimTooLarge { .. })));
    }

    #[test]
    fn variances_match_column_variances_on_uncorrelated_axes() {
        // Diagonal covariance input: eigenvalues are the column variances.
        let mut rng = derive_stream(RngSeed(3), "pca-diag");
        let entries: Vec<(String, Vec<f64>)> = (0..500)
            .map(|i| {
                let row = vec![
                    3.0 * rng.random_range(-1.0..1.0f64),
                    1.0 * rng.random_range(-1.0..1.0f64),
                ];
                (format!("u{i:04}"), row)
            })
            .collect();
        let table = FeatureTable::new(entries).unwrap();
        let out = pca_reduce(&table, 2).unwrap();
        assert!(out.explained_variance[0] > out.explained_variance[1]);
        // First component should align with the high-variance axis.
        assert!(out.components[0][0].abs() > 0.99);
    }
}
