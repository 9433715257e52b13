//! The three reward metrics, the per-unit optimal action, and per-step
//! regret.
//!
//! All three kinds are maximized by the agent:
//!
//! - `diff`: the chosen drug's score minus the unit's best (lowest) score,
//!   negated; 0 exactly when the chosen drug attains the minimum, else < 0.
//! - `rank`: drugs ranked by score ascending, best drug ranked k and the
//!   least active ranked 1; ties receive the mean of their tied positions.
//! - `percentile`: fraction of the cohort responding no better than this
//!   unit does to the chosen drug, from the frozen per-drug distributions.

use std::fmt;

use thiserror::Error;

use crate::ingest::{percentile_of, Dataset};
use crate::num::Scalar;
use crate::types::{DrugId, ParseEnumError, UnitId};

/// Reward metric selector. Serialized as `diff|rank|percentile`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RewardKind {
    DiffBest,
    Rank,
    Percentile,
}

impl RewardKind {
    pub const ALL: [RewardKind; 3] = [RewardKind::DiffBest, RewardKind::Rank, RewardKind::Percentile];

    pub fn as_str(self) -> &'static str {
        match self {
            RewardKind::DiffBest => "diff",
            RewardKind::Rank => "rank",
            RewardKind::Percentile => "percentile",
        }
    }
}

impl fmt::Display for RewardKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for RewardKind {
    type Err = ParseEnumError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "diff" => Ok(RewardKind::DiffBest),
            "rank" => Ok(RewardKind::Rank),
            "percentile" => Ok(RewardKind::Percentile),
            other => Err(ParseEnumError {
                what: "reward kind",
                got: other.to_string(),
                expected: "diff|rank|percentile",
            }),
        }
    }
}

/// A reward value outside its kind's admissible range.
#[derive(Debug, Clone, Error)]
#[error("{kind} reward {value} outside its range ({expected})")]
pub struct RewardRangeError {
    pub kind: RewardKind,
    pub value: f64,
    pub expected: &'static str,
}

/// A scalar reward tagged with its kind; construction enforces the kind's
/// range (diff ≤ 0, rank ∈ [1, k], percentile ∈ (0, 1]).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardValue<S: Scalar> {
    kind: RewardKind,
    value: S,
}

impl<S: Scalar> RewardValue<S> {
    pub fn new(kind: RewardKind, value: S, n_drugs: usize) -> Result<RewardValue<S>, RewardRangeError> {
        let bad = |expected: &'static str| RewardRangeError {
            kind,
            value: value.as_(),
            expected,
        };
        match kind {
            RewardKind::DiffBest => {
                if value > S::zero() {
                    return Err(bad("<= 0"));
                }
            }
            RewardKind::Rank => {
                if value < S::one() || value > S::of(n_drugs as f64) {
                    return Err(bad("in [1, k]"));
                }
            }
            RewardKind::Percentile => {
                if value <= S::zero() || value > S::one() {
                    return Err(bad("in (0, 1]"));
                }
            }
        }
        Ok(RewardValue { kind, value })
    }

    pub fn kind(self) -> RewardKind {
        self.kind
    }

    pub fn value(self) -> S {
        self.value
    }
}

/// Ascending rank of `row[drug]` within `row`, tied entries receiving the
/// mean of their tied positions (1-based).
fn ascending_rank<S: Scalar>(row: &[S], drug: usize) -> S {
    let s = row[drug];
    let below = row.iter().filter(|x| **x < s).count();
    let tied = row.iter().filter(|x| **x == s).count();
    // Positions below+1 ..= below+tied share the rank.
    S::of(below as f64) + S::of((tied as f64 + 1.0) / 2.0)
}

/// Reward for treating `unit` with `drug` under metric `kind`.
pub fn compute_reward<S: Scalar>(
    dataset: &Dataset<S>,
    unit: UnitId,
    drug: DrugId,
    kind: RewardKind,
) -> RewardValue<S> {
    let row = dataset.scores().unit_row(unit.0);
    let k = row.len();
    let value = match kind {
        RewardKind::DiffBest => {
            let min = row.iter().copied().fold(S::infinity(), S::min);
            -(row[drug.0] - min)
        }
        RewardKind::Rank => S::of((k + 1) as f64) - ascending_rank(row, drug.0),
        RewardKind::Percentile => percentile_of(dataset, drug, row[drug.0]),
    };
    RewardValue::new(kind, value, k).expect("rewards computed from dataset scores are in range")
}

/// Convenience: the scalar reward value.
pub fn reward_scalar<S: Scalar>(dataset: &Dataset<S>, unit: UnitId, drug: DrugId, kind: RewardKind) -> S {
    compute_reward(dataset, unit, drug, kind).value()
}

/// The drug maximizing `kind`'s reward for `unit`; ties by lowest index.
pub fn optimal_action<S: Scalar>(dataset: &Dataset<S>, unit: UnitId, kind: RewardKind) -> DrugId {
    let rewards: Vec<S> = (0..dataset.n_drugs())
        .map(|d| reward_scalar(dataset, unit, DrugId(d), kind))
        .collect();
    DrugId(crate::num::argmax(&rewards))
}

/// Reward forgone by choosing `chosen` instead of the optimal action; >= 0,
/// and 0 exactly when `chosen` attains the unit's maximum reward.
pub fn instant_regret<S: Scalar>(dataset: &Dataset<S>, unit: UnitId, chosen: DrugId, kind: RewardKind) -> S {
    let best = optimal_action(dataset, unit, kind);
    reward_scalar(dataset, unit, best, kind) - reward_scalar(dataset, unit, chosen, kind)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    use crate::rng::{derive_stream, RngSeed};

    /// Dataset with a single prescribed unit row; filler rows keep the
    /// column medians from disturbing relative comparisons in row 0 tests
    /// that only use diff/rank (shift-invariant per unit).
    fn dataset_with_rows(rows: Vec<Vec<f64>>) -> Dataset<f64> {
        let n = rows.len();
        let k = rows[0].len();
        let drugs = (0..k).map(|d| format!("d{d:02}")).collect();
        let units = (0..n).map(|u| format!("u{u:03}")).collect();
        let scores = rows.into_iter().flatten().collect();
        Dataset::from_parts(drugs, units, scores, vec![vec![]; n], vec![], vec![vec![]; n]).unwrap()
    }

    /// Brute-force re-implementations used as the oracle: re-sort from
    /// scratch, count over all units, no shared code with the library path.
    mod brute {
        use super::*;

        pub fn reward(ds: &Dataset<f64>, unit: usize, drug: usize, kind: RewardKind) -> f64 {
            let row: Vec<f64> = (0..ds.n_drugs()).map(|d| ds.score(UnitId(unit), DrugId(d))).collect();
            match kind {
                RewardKind::DiffBest => {
                    let mut min = f64::INFINITY;
                    for &s in &row {
                        if s < min {
                            min = s;
                        }
                    }
                    -(row[drug] - min)
                }
                RewardKind::Rank => {
                    let mut positions = Vec::new();
                    let mut sorted: Vec<(f64, usize)> =
                        row.iter().copied().enumerate().map(|(i, s)| (s, i)).collect();
                    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
                    for (pos, (s, _)) in sorted.iter().enumerate() {
                        if *s == row[drug] {
                            positions.push(pos as f64 + 1.0);
                        }
                    }
                    let rank = positions.iter().sum::<f64>() / positions.len() as f64;
                    (row.len() + 1) as f64 - rank
                }
                RewardKind::Percentile => {
                    let n = ds.n_units();
                    let count = (0..n)
                        .filter(|&u| ds.score(UnitId(u), DrugId(drug)) >= row[drug])
                        .count();
                    count as f64 / n as f64
                }
            }
        }

        pub fn optimal(ds: &Dataset<f64>, unit: usize, kind: RewardKind) -> usize {
            let mut best = 0;
            let mut best_r = f64::NEG_INFINITY;
            for d in 0..ds.n_drugs() {
                let r = reward(ds, unit, d, kind);
                if r > best_r {
                    best_r = r;
                    best = d;
                }
            }
            best
        }
    }

    /// Wraps a target row with its negation and two extreme constant rows so
    /// every column's median is exactly 0 and centering leaves row 0 intact.
    fn dataset_with_target_row(row: Vec<f64>) -> Dataset<f64> {
        let k = row.len();
        let negated: Vec<f64> = row.iter().map(|s| -s).collect();
        dataset_with_rows(vec![row, negated, vec![-10.0; k], vec![10.0; k]])
    }

    #[test]
    fn rank_reward_examples() {
        let ds = dataset_with_target_row(vec![0.5, -1.2, 0.3, 0.0, 2.0, -0.7, 1.1]);
        let u = UnitId(0);

        // Choosing the -1.2 drug ranks 7 of 7.
        assert_eq!(reward_scalar(&ds, u, DrugId(1), RewardKind::Rank), 7.0);
        // Choosing the 0.3 drug: -(0.3 - (-1.2)) = -1.5.
        assert!((reward_scalar(&ds, u, DrugId(2), RewardKind::DiffBest) + 1.5).abs() < 1e-12);
        // Worst drug (2.0) ranks 1; regret 7 - 1 = 6 under rank.
        assert_eq!(reward_scalar(&ds, u, DrugId(4), RewardKind::Rank), 1.0);
        assert_eq!(instant_regret(&ds, u, DrugId(4), RewardKind::Rank), 6.0);
    }

    #[test]
    fn tied_minimum_ranks_share_the_mean() {
        let ds = dataset_with_target_row(vec![-1.2, -1.2, 0.3, 0.0, 2.0, -0.7, 1.1]);
        // Two drugs tied at the minimum: mean of positions 6 and 7 → 6.5.
        assert_eq!(reward_scalar(&ds, UnitId(0), DrugId(0), RewardKind::Rank), 6.5);
        assert_eq!(reward_scalar(&ds, UnitId(0), DrugId(1), RewardKind::Rank), 6.5);
    }

    #[test]
    fn rank_rewards_sum_to_k_times_k_plus_one_over_two() {
        let ds = random_dataset(23, 7, 5);
        for u in 0..ds.n_units() {
            let total: f64 = (0..7).map(|d| reward_scalar(&ds, UnitId(u), DrugId(d), RewardKind::Rank)).sum();
            assert!((total - 28.0).abs() < 1e-9, "unit {u}: {total}");
        }
    }

    #[test]
    fn diff_best_zero_iff_minimum() {
        let ds = random_dataset(31, 7, 2);
        for u in 0..ds.n_units() {
            let best = optimal_action(&ds, UnitId(u), RewardKind::DiffBest);
            assert_eq!(reward_scalar(&ds, UnitId(u), best, RewardKind::DiffBest), 0.0);
            let max: f64 = (0..7)
                .map(|d| reward_scalar(&ds, UnitId(u), DrugId(d), RewardKind::DiffBest))
                .fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(max, 0.0);
        }
    }

    fn random_dataset(n: usize, k: usize, seed: u64) -> Dataset<f64> {
        let mut rng = derive_stream(RngSeed(seed), "rewards-test");
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..k).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect();
        dataset_with_rows(rows)
    }

    #[test]
    fn matches_brute_force_on_random_instances() {
        let ds = random_dataset(40, 7, 11);
        let mut rng = derive_stream(RngSeed(12), "rewards-pick");
        for _ in 0..200 {
            let u = rng.random_range(0..ds.n_units());
            let d = rng.random_range(0..ds.n_drugs());
            let kind = RewardKind::ALL[rng.random_range(0..3)];
            assert_eq!(
                reward_scalar(&ds, UnitId(u), DrugId(d), kind),
                brute::reward(&ds, u, d, kind),
                "unit {u} drug {d} kind {kind}"
            );
            assert_eq!(
                optimal_action(&ds, UnitId(u), kind).0,
                brute::optimal(&ds, u, kind),
                "optimal action unit {u} kind {kind}"
            );
            let regret = instant_regret(&ds, UnitId(u), DrugId(d), kind);
            let brute_regret = brute::reward(&ds, u, brute::optimal(&ds, u, kind), kind) - brute::reward(&ds, u, d, kind);
            assert_eq!(regret, brute_regret);
            assert!(regret >= 0.0);
        }
    }

    #[test]
    fn diff_and_rank_argmax_coincide_with_argmin_score() {
        let ds = random_dataset(25, 7, 19);
        for u in 0..ds.n_units() {
            let row = ds.scores().unit_row(u);
            let argmin = crate::num::argmin(row);
            assert_eq!(optimal_action(&ds, UnitId(u), RewardKind::DiffBest).0, argmin);
            assert_eq!(optimal_action(&ds, UnitId(u), RewardKind::Rank).0, argmin);
        }
    }

    #[test]
    fn percentile_can_disagree_with_diff_best() {
        // Drug 0 is unit 0's minimum but mid-distribution for drug 0, while
        // drug 1's score is drug 1's extreme: percentile picks drug 1.
        // (Columns keep median 0, so four units are needed.)
        let rows = vec![
            vec![-0.3, -0.2],
            vec![-0.5, 0.0],
            vec![0.3, 0.0],
            vec![0.5, 0.4],
        ];
        let ds = dataset_with_rows(rows);
        let u = UnitId(0);
        assert_eq!(optimal_action(&ds, u, RewardKind::DiffBest), DrugId(0));
        assert_eq!(optimal_action(&ds, u, RewardKind::Percentile), DrugId(1));
        assert_eq!(reward_scalar(&ds, u, DrugId(1), RewardKind::Percentile), 1.0);
        assert_eq!(reward_scalar(&ds, u, DrugId(0), RewardKind::Percentile), 0.75);
        // And matches brute force on every arm.
        for d in 0..2 {
            assert_eq!(
                reward_scalar(&ds, u, DrugId(d), RewardKind::Percentile),
                brute::reward(&ds, 0, d, RewardKind::Percentile)
            );
        }
    }

    #[test]
    fn all_scores_equal_selects_drug_zero() {
        let ds = dataset_with_rows(vec![vec![0.0; 7]; 3]);
        for kind in RewardKind::ALL {
            assert_eq!(optimal_action(&ds, UnitId(0), kind), DrugId(0));
        }
    }

    #[test]
    fn chosen_equals_optimal_gives_zero_regret() {
        let ds = random_dataset(12, 7, 23);
        for u in 0..ds.n_units() {
            for kind in RewardKind::ALL {
                let best = optimal_action(&ds, UnitId(u), kind);
                assert_eq!(instant_regret(&ds, UnitId(u), best, kind), 0.0);
            }
        }
    }

    #[test]
    fn unit_constant_shift_leaves_diff_and_rank_unchanged() {
        // Diff and rank read only the unit's own row, so adding a constant to
        // that row changes neither.
        let mut rng = derive_stream(RngSeed(29), "rewards-shift");
        for _ in 0..50 {
            let row: Vec<f64> = (0..7).map(|_| rng.random_range(-3.0..3.0)).collect();
            let shift = rng.random_range(-5.0..5.0);
            let shifted: Vec<f64> = row.iter().map(|s| s + shift).collect();
            for d in 0..7 {
                assert_eq!(ascending_rank(&row, d), ascending_rank(&shifted, d), "rank, drug {d}");
                let min = row.iter().copied().fold(f64::INFINITY, f64::min);
                let min_s = shifted.iter().copied().fold(f64::INFINITY, f64::min);
                let diff = -(row[d] - min);
                let diff_s = -(shifted[d] - min_s);
                assert!((diff - diff_s).abs() < 1e-9, "diff, drug {d}: {diff} vs {diff_s}");
            }
        }
    }

    #[test]
    fn reward_value_ranges_enforced() {
        assert!(RewardValue::new(RewardKind::DiffBest, 0.5, 7).is_err());
        assert!(RewardValue::new(RewardKind::DiffBest, -0.5, 7).is_ok());
        assert!(RewardValue::new(RewardKind::Rank, 0.0, 7).is_err());
        assert!(RewardValue::new(RewardKind::Rank, 7.5, 7).is_err());
        assert!(RewardValue::new(RewardKind::Rank, 7.0, 7).is_ok());
        assert!(RewardValue::new(RewardKind::Percentile, 0.0, 7).is_err());
        assert!(RewardValue::new(RewardKind::Percentile, 1.0, 7).is_ok());
    }
}
