//! Property tests for the ingest/reward invariants.

use banditbench::ingest::{normalize_scores, percentile_of, Dataset, RawResponseRow, RawResponseTable};
use banditbench::rewards::{reward_scalar, RewardKind, RewardValue};
use banditbench::types::{ContextMode, DrugId, UnitId};
use proptest::prelude::*;

fn table_from_grid(ic50s: &[Vec<f64>]) -> RawResponseTable {
    let mut rows = Vec::new();
    for (u, unit_row) in ic50s.iter().enumerate() {
        for (d, ic50) in unit_row.iter().enumerate() {
            rows.push(RawResponseRow {
                unit: format!("u{u:03}"),
                drug: format!("d{d:02}"),
                ic50: *ic50,
            });
        }
    }
    RawResponseTable::new(rows).unwrap()
}

fn grid_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    // 4..12 units, 2..6 drugs, strictly positive IC50s over several decades.
    (4usize..12, 2usize..6).prop_flat_map(|(n, k)| {
        prop::collection::vec(prop::collection::vec(1e-4f64..1e4, k..=k), n..=n)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Rescaling any drug's IC50 column by a positive constant leaves the
    /// normalized scores unchanged (the log shift cancels with the median).
    #[test]
    fn normalization_invariant_under_per_drug_rescale(
        grid in grid_strategy(),
        scale in 1e-3f64..1e3,
    ) {
        let base = normalize_scores::<f64>(&table_from_grid(&grid)).unwrap();
        let mut rescaled = grid.clone();
        for row in &mut rescaled {
            row[0] *= scale;
        }
        let scaled = normalize_scores::<f64>(&table_from_grid(&rescaled)).unwrap();
        for u in 0..grid.len() {
            for d in 0..grid[0].len() {
                let a = base.matrix.score(u, d);
                let b = scaled.matrix.score(u, d);
                prop_assert!((a - b).abs() < 1e-12, "({u},{d}): {a} vs {b}");
            }
        }
    }

    /// Every drug column of a normalized matrix has median (numerically) zero.
    #[test]
    fn normalized_columns_have_zero_median(grid in grid_strategy()) {
        let norm = normalize_scores::<f64>(&table_from_grid(&grid)).unwrap();
        prop_assert!(norm.matrix.max_column_median_abs() < 1e-9);
    }

    /// Percentile rewards agree with a direct count and never leave (0, 1].
    #[test]
    fn percentile_matches_brute_force(grid in grid_strategy()) {
        let norm = normalize_scores::<f64>(&table_from_grid(&grid)).unwrap();
        let n = norm.units.len();
        let scores: Vec<f64> = (0..n).flat_map(|u| norm.matrix.unit_row(u).to_vec()).collect();
        let ds = Dataset::from_parts(
            norm.drugs.clone(),
            norm.units.clone(),
            scores,
            vec![vec![]; n],
            vec![],
            vec![vec![]; n],
        )
        .unwrap();
        for u in 0..n {
            for d in 0..ds.n_drugs() {
                let drug = DrugId(d);
                let s = ds.score(UnitId(u), drug);
                let expect = (0..n).filter(|&v| ds.score(UnitId(v), drug) >= s).count() as f64 / n as f64;
                let got = percentile_of(&ds, drug, s);
                prop_assert_eq!(got, expect);
                prop_assert!(got > 0.0 && got <= 1.0);
            }
        }
    }

    /// Per unit, rank rewards sum to k(k+1)/2 regardless of ties, and the
    /// diff-best maximum is exactly zero.
    #[test]
    fn reward_structure_invariants(grid in grid_strategy()) {
        let norm = normalize_scores::<f64>(&table_from_grid(&grid)).unwrap();
        let n = norm.units.len();
        let k = norm.drugs.len();
        let scores: Vec<f64> = (0..n).flat_map(|u| norm.matrix.unit_row(u).to_vec()).collect();
        let ds = Dataset::from_parts(
            norm.drugs.clone(),
            norm.units.clone(),
            scores,
            vec![vec![]; n],
            vec![],
            vec![vec![]; n],
        )
        .unwrap();
        for u in 0..n {
            let unit = UnitId(u);
            let rank_sum: f64 = (0..k).map(|d| reward_scalar(&ds, unit, DrugId(d), RewardKind::Rank)).sum();
            prop_assert!((rank_sum - (k * (k + 1)) as f64 / 2.0).abs() < 1e-9);
            let diff_max = (0..k)
                .map(|d| reward_scalar(&ds, unit, DrugId(d), RewardKind::DiffBest))
                .fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(diff_max, 0.0);
        }
    }

    /// Context length is a pure function of the mode.
    #[test]
    fn context_length_by_mode(embed in 1usize..40, k in 2usize..10) {
        prop_assert_eq!(ContextMode::Genomic.context_len(embed, k), embed);
        prop_assert_eq!(ContextMode::Guideline.context_len(embed, k), k);
        prop_assert_eq!(ContextMode::Both.context_len(embed, k), embed + k);
    }

    /// Out-of-range reward values are rejected at construction.
    #[test]
    fn reward_ranges_enforced(v in -10.0f64..10.0, k in 2usize..9) {
        let diff = RewardValue::new(RewardKind::DiffBest, v, k);
        prop_assert_eq!(diff.is_ok(), v <= 0.0);
        let rank = RewardValue::new(RewardKind::Rank, v, k);
        prop_assert_eq!(rank.is_ok(), (1.0..=k as f64).contains(&v));
        let pct = RewardValue::new(RewardKind::Percentile, v, k);
        prop_assert_eq!(pct.is_ok(), v > 0.0 && v <= 1.0);
    }
}
