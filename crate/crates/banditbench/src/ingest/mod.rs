//! Cohort ingestion: raw response tables, feature embeddings, biomarker
//! flags, and their assembly into an immutable [`Dataset`].
//!
//! The response score of unit `u` under drug `d` is `ln IC50(u, d)` minus the
//! per-drug median `ln IC50` across the cohort, so lower means more
//! sensitive and every drug column has median zero. Units lacking a response
//! for any drug are dropped (the benchmark needs complete counterfactuals);
//! units lacking features or flags are an error.
//!
//! Embeddings are consumed, not fitted: the expected width is 20 but any
//! width is accepted, and [`pca::pca_reduce`] offers a principal-components
//! fallback for synthetic cohorts. Note that an embedding fitted on the full
//! cohort leaks information across the assignment sequence; scores on such
//! data are optimistic and are reported as-is.

pub mod parse;
pub mod pca;
pub mod synth;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::PathBuf;

use thiserror::Error;

use crate::num::{median, Scalar};
use crate::types::DrugId;

/// Errors raised while parsing or assembling cohort data.
#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("non-positive IC50 {value} for unit `{unit}`, drug `{drug}` (concentrations must be > 0)")]
    NonPositiveIc50 { unit: String, drug: String, value: f64 },
    #[error("duplicate response entry for unit `{unit}`, drug `{drug}`")]
    DuplicatePair { unit: String, drug: String },
    #[error("duplicate drug name `{name}`")]
    DuplicateDrug { name: String },
    #[error("duplicate unit row `{name}`")]
    DuplicateUnit { name: String },
    #[error("dataset needs at least 2 drugs, found {found}")]
    TooFewDrugs { found: usize },
    #[error("unit `{unit}` has responses but no feature row")]
    MissingFeatures { unit: String },
    #[error("unit `{unit}` has responses but no biomarker row")]
    MissingBiomarkers { unit: String },
    #[error("no unit has a complete response profile; the unit sets do not intersect")]
    EmptyUnitSet,
    #[error("feature row for unit `{unit}` has width {found}, expected {expected}")]
    WidthMismatch { unit: String, expected: usize, found: usize },
    #[error("non-finite feature value for unit `{unit}` at column {column}")]
    NonFinite { unit: String, column: usize },
    #[error("biomarker key `{key}` does not match PREFIX:Name (e.g. MUT:BRAF_V600E)")]
    BadFlagKey { key: String },
    #[error("cannot reduce {width}-wide features to {dim} dimensions")]
    DimTooLarge { dim: usize, width: usize },
    #[error(transparent)]
    Rule(#[from] crate::guidelines::RuleError),
}

/// One observed (unit, drug, IC50) response on the raw concentration scale.
#[derive(Debug, Clone, PartialEq)]
pub struct RawResponseRow {
    pub unit: String,
    pub drug: String,
    pub ic50: f64,
}

/// Validated long-format response observations.
#[derive(Debug, Clone)]
pub struct RawResponseTable {
    rows: Vec<RawResponseRow>,
}

impl RawResponseTable {
    /// Validates positivity and (unit, drug) uniqueness.
    pub fn new(rows: Vec<RawResponseRow>) -> Result<RawResponseTable, IngestError> {
        let mut seen = BTreeSet::new();
        for row in &rows {
            if !(row.ic50 > 0.0) || !row.ic50.is_finite() {
                return Err(IngestError::NonPositiveIc50 {
                    unit: row.unit.clone(),
                    drug: row.drug.clone(),
                    value: row.ic50,
                });
            }
            if !seen.insert((row.unit.clone(), row.drug.clone())) {
                return Err(IngestError::DuplicatePair {
                    unit: row.unit.clone(),
                    drug: row.drug.clone(),
                });
            }
        }
        Ok(RawResponseTable { rows })
    }

    pub fn rows(&self) -> &[RawResponseRow] {
        &self.rows
    }
}

/// Per-unit precomputed embedding vectors, one shared width.
#[derive(Debug, Clone)]
pub struct FeatureTable<S: Scalar> {
    units: Vec<String>,
    width: usize,
    rows: Vec<Vec<S>>,
    index: HashMap<String, usize>,
}

impl<S: Scalar> FeatureTable<S> {
    pub fn new(entries: Vec<(String, Vec<S>)>) -> Result<FeatureTable<S>, IngestError> {
        let width = entries.first().map(|(_, v)| v.len()).unwrap_or(0);
        let mut units = Vec::with_capacity(entries.len());
        let mut rows = Vec::with_capacity(entries.len());
        let mut index = HashMap::new();
        for (unit, row) in entries {
            if row.len() != width {
                return Err(IngestError::WidthMismatch {
                    unit,
                    expected: width,
                    found: row.len(),
                });
            }
            if let Some(col) = row.iter().position(|v| !v.is_finite()) {
                return Err(IngestError::NonFinite { unit, column: col });
            }
            if index.insert(unit.clone(), units.len()).is_some() {
                return Err(IngestError::DuplicateUnit { name: unit });
            }
            units.push(unit);
            rows.push(row);
        }
        Ok(FeatureTable { units, width, rows, index })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn units(&self) -> &[String] {
        &self.units
    }

    pub fn row(&self, unit: &str) -> Option<&[S]> {
        self.index.get(unit).map(|&i| self.rows[i].as_slice())
    }

    pub fn rows(&self) -> &[Vec<S>] {
        &self.rows
    }
}

/// Returns true when `key` matches the `PREFIX:Name` biomarker grammar.
pub fn valid_flag_key(key: &str) -> bool {
    match key.split_once(':') {
        Some((prefix, name)) => {
            !prefix.is_empty()
                && prefix.bytes().all(|b| b.is_ascii_uppercase())
                && !name.is_empty()
                && name.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
        }
        None => false,
    }
}

/// Per-unit binary biomarker flags keyed by namespaced names.
#[derive(Debug, Clone)]
pub struct BiomarkerTable {
    units: Vec<String>,
    keys: Vec<String>,
    flags: Vec<Vec<bool>>,
    index: HashMap<String, usize>,
}

impl BiomarkerTable {
    pub fn new(keys: Vec<String>, entries: Vec<(String, Vec<bool>)>) -> Result<BiomarkerTable, IngestError> {
        for key in &keys {
            if !valid_flag_key(key) {
                return Err(IngestError::BadFlagKey { key: key.clone() });
            }
        }
        let mut units = Vec::with_capacity(entries.len());
        let mut flags = Vec::with_capacity(entries.len());
        let mut index = HashMap::new();
        for (unit, row) in entries {
            if row.len() != keys.len() {
                return Err(IngestError::WidthMismatch {
                    unit,
                    expected: keys.len(),
                    found: row.len(),
                });
            }
            if index.insert(unit.clone(), units.len()).is_some() {
                return Err(IngestError::DuplicateUnit { name: unit });
            }
            units.push(unit);
            flags.push(row);
        }
        Ok(BiomarkerTable { units, keys, flags, index })
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn units(&self) -> &[String] {
        &self.units
    }

    pub fn row(&self, unit: &str) -> Option<&[bool]> {
        self.index.get(unit).map(|&i| self.flags[i].as_slice())
    }
}

/// Dense unit × drug response score matrix with per-drug median zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMatrix<S: Scalar> {
    n_units: usize,
    n_drugs: usize,
    scores: Vec<S>,
}

impl<S: Scalar> ResponseMatrix<S> {
    /// Median-centers each drug column of `raw` (row-major n × k).
    pub fn from_raw_scores(n_units: usize, n_drugs: usize, raw: Vec<S>) -> ResponseMatrix<S> {
        assert_eq!(raw.len(), n_units * n_drugs, "score matrix shape mismatch");
        let mut scores = raw;
        let mut column = vec![S::zero(); n_units];
        for d in 0..n_drugs {
            for u in 0..n_units {
                column[u] = scores[u * n_drugs + d];
            }
            let m = median(&column);
            for u in 0..n_units {
                scores[u * n_drugs + d] -= m;
            }
        }
        ResponseMatrix { n_units, n_drugs, scores }
    }

    pub fn n_units(&self) -> usize {
        self.n_units
    }

    pub fn n_drugs(&self) -> usize {
        self.n_drugs
    }

    #[inline]
    pub fn score(&self, unit: usize, drug: usize) -> S {
        self.scores[unit * self.n_drugs + drug]
    }

    /// All drug scores for one unit.
    #[inline]
    pub fn unit_row(&self, unit: usize) -> &[S] {
        &self.scores[unit * self.n_drugs..(unit + 1) * self.n_drugs]
    }

    pub fn drug_column(&self, drug: usize) -> Vec<S> {
        (0..self.n_units).map(|u| self.score(u, drug)).collect()
    }

    /// Largest |per-drug median|; zero up to float rounding after centering.
    pub fn max_column_median_abs(&self) -> S {
        (0..self.n_drugs)
            .map(|d| median(&self.drug_column(d)).abs())
            .fold(S::zero(), S::max)
    }
}

/// Result of [`normalize_scores`]: the centered matrix plus the row/column
/// labels it is expressed in and the units that had to be dropped.
#[derive(Debug, Clone)]
pub struct NormalizedResponses<S: Scalar> {
    pub drugs: Vec<String>,
    pub units: Vec<String>,
    pub matrix: ResponseMatrix<S>,
    pub dropped_units: Vec<String>,
}

/// Log-transforms IC50 values and centers each drug by its median `ln IC50`.
///
/// Units are sorted by name; units missing any drug are dropped and reported
/// in `dropped_units`. Multiplying one drug's IC50 values by any positive
/// constant leaves its score column unchanged.
pub fn normalize_scores<S: Scalar>(raw: &RawResponseTable) -> Result<NormalizedResponses<S>, IngestError> {
    let mut drug_set = BTreeSet::new();
    for row in raw.rows() {
        drug_set.insert(row.drug.clone());
    }
    let drugs: Vec<String> = drug_set.into_iter().collect();
    if drugs.len() < 2 {
        return Err(IngestError::TooFewDrugs { found: drugs.len() });
    }
    let drug_index: HashMap<&str, usize> = drugs.iter().map(|d| d.as_str()).zip(0..).collect();

    let mut per_unit: BTreeMap<&str, Vec<Option<f64>>> = BTreeMap::new();
    for row in raw.rows() {
        let entry = per_unit
            .entry(row.unit.as_str())
            .or_insert_with(|| vec![None; drugs.len()]);
        entry[drug_index[row.drug.as_str()]] = Some(row.ic50);
    }

    let mut units = Vec::new();
    let mut dropped_units = Vec::new();
    let mut raw_scores: Vec<S> = Vec::new();
    for (unit, responses) in &per_unit {
        if responses.iter().all(|r| r.is_some()) {
            units.push(unit.to_string());
            raw_scores.extend(responses.iter().map(|r| S::of(r.unwrap()).ln()));
        } else {
            dropped_units.push(unit.to_string());
        }
    }
    if units.is_empty() {
        return Err(IngestError::EmptyUnitSet);
    }

    let matrix = ResponseMatrix::from_raw_scores(units.len(), drugs.len(), raw_scores);
    Ok(NormalizedResponses { drugs, units, matrix, dropped_units })
}

/// Immutable cohort: response scores, embeddings, biomarker flags, and the
/// frozen per-drug score distributions used for percentile rewards.
#[derive(Debug, Clone)]
pub struct Dataset<S: Scalar = f64> {
    drugs: Vec<String>,
    units: Vec<String>,
    scores: ResponseMatrix<S>,
    features: Vec<Vec<S>>,
    feature_width: usize,
    biomarker_keys: Vec<String>,
    flags: Vec<Vec<bool>>,
    sorted_scores: Vec<Vec<S>>,
    drug_index: HashMap<String, usize>,
    flag_index: HashMap<String, usize>,
}

/// An assembled dataset plus the units dropped for incomplete responses.
#[derive(Debug, Clone)]
pub struct Assembled<S: Scalar> {
    pub dataset: Dataset<S>,
    pub dropped_units: Vec<String>,
}

impl<S: Scalar> Dataset<S> {
    /// Joins the three cohort tables into a dataset.
    ///
    /// Units with incomplete responses are dropped (returned as warnings);
    /// retained units missing a feature or biomarker row are an error.
    pub fn assemble(
        raw: &RawResponseTable,
        features: &FeatureTable<S>,
        biomarkers: &BiomarkerTable,
    ) -> Result<Assembled<S>, IngestError> {
        let normalized = normalize_scores::<S>(raw)?;
        let mut feat_rows = Vec::with_capacity(normalized.units.len());
        let mut flag_rows = Vec::with_capacity(normalized.units.len());
        for unit in &normalized.units {
            let feat = features
                .row(unit)
                .ok_or_else(|| IngestError::MissingFeatures { unit: unit.clone() })?;
            let flags = biomarkers
                .row(unit)
                .ok_or_else(|| IngestError::MissingBiomarkers { unit: unit.clone() })?;
            feat_rows.push(feat.to_vec());
            flag_rows.push(flags.to_vec());
        }
        let dataset = Dataset::from_tables(
            normalized.drugs,
            normalized.units,
            normalized.matrix,
            feat_rows,
            features.width(),
            biomarkers.keys().to_vec(),
            flag_rows,
        )?;
        Ok(Assembled {
            dataset,
            dropped_units: normalized.dropped_units,
        })
    }

    /// Builds a dataset from already-aligned parts; `raw_scores` is row-major
    /// n × k and is median-centered here.
    pub fn from_parts(
        drugs: Vec<String>,
        units: Vec<String>,
        raw_scores: Vec<S>,
        features: Vec<Vec<S>>,
        biomarker_keys: Vec<String>,
        flags: Vec<Vec<bool>>,
    ) -> Result<Dataset<S>, IngestError> {
        let matrix = ResponseMatrix::from_raw_scores(units.len(), drugs.len(), raw_scores);
        let width = features.first().map(Vec::len).unwrap_or(0);
        Dataset::from_tables(drugs, units, matrix, features, width, biomarker_keys, flags)
    }

    fn from_tables(
        drugs: Vec<String>,
        units: Vec<String>,
        scores: ResponseMatrix<S>,
        features: Vec<Vec<S>>,
        feature_width: usize,
        biomarker_keys: Vec<String>,
        flags: Vec<Vec<bool>>,
    ) -> Result<Dataset<S>, IngestError> {
        if drugs.len() < 2 {
            return Err(IngestError::TooFewDrugs { found: drugs.len() });
        }
        if units.is_empty() {
            return Err(IngestError::EmptyUnitSet);
        }
        assert_eq!(scores.n_units(), units.len());
        assert_eq!(scores.n_drugs(), drugs.len());
        assert_eq!(features.len(), units.len());
        assert_eq!(flags.len(), units.len());

        let mut drug_index = HashMap::new();
        for (i, d) in drugs.iter().enumerate() {
            if drug_index.insert(d.clone(), i).is_some() {
                return Err(IngestError::DuplicateDrug { name: d.clone() });
            }
        }
        let mut unit_names = HashMap::new();
        for u in &units {
            if unit_names.insert(u.clone(), ()).is_some() {
                return Err(IngestError::DuplicateUnit { name: u.clone() });
            }
        }
        for key in &biomarker_keys {
            if !valid_flag_key(key) {
                return Err(IngestError::BadFlagKey { key: key.clone() });
            }
        }
        for (u, row) in features.iter().enumerate() {
            if row.len() != feature_width {
                return Err(IngestError::WidthMismatch {
                    unit: units[u].clone(),
                    expected: feature_width,
                    found: row.len(),
                });
            }
        }

        let sorted_scores = (0..drugs.len())
            .map(|d| {
                let mut col = scores.drug_column(d);
                col.sort_unstable_by(|a, b| a.partial_cmp(b).expect("scores are finite"));
                col
            })
            .collect();
        let flag_index = biomarker_keys
            .iter()
            .enumerate()
            .map(|(i, k)| (k.clone(), i))
            .collect();

        Ok(Dataset {
            drugs,
            units,
            scores,
            features,
            feature_width,
            biomarker_keys,
            flags,
            sorted_scores,
            drug_index,
            flag_index,
        })
    }

    pub fn n_units(&self) -> usize {
        self.units.len()
    }

    pub fn n_drugs(&self) -> usize {
        self.drugs.len()
    }

    pub fn drugs(&self) -> &[String] {
        &self.drugs
    }

    pub fn units(&self) -> &[String] {
        &self.units
    }

    pub fn drug_name(&self, drug: DrugId) -> &str {
        &self.drugs[drug.0]
    }

    pub fn unit_name(&self, unit: crate::types::UnitId) -> &str {
        &self.units[unit.0]
    }

    pub fn drug_id(&self, name: &str) -> Option<DrugId> {
        self.drug_index.get(name).copied().map(DrugId)
    }

    pub fn scores(&self) -> &ResponseMatrix<S> {
        &self.scores
    }

    #[inline]
    pub fn score(&self, unit: crate::types::UnitId, drug: DrugId) -> S {
        self.scores.score(unit.0, drug.0)
    }

    pub fn feature_width(&self) -> usize {
        self.feature_width
    }

    pub fn feature_row(&self, unit: crate::types::UnitId) -> &[S] {
        &self.features[unit.0]
    }

    pub fn biomarker_keys(&self) -> &[String] {
        &self.biomarker_keys
    }

    pub fn flag_id(&self, key: &str) -> Option<usize> {
        self.flag_index.get(key).copied()
    }

    pub fn unit_flags(&self, unit: crate::types::UnitId) -> &[bool] {
        &self.flags[unit.0]
    }

    /// Frozen ascending score distribution for one drug.
    pub fn sorted_drug_scores(&self, drug: DrugId) -> &[S] {
        &self.sorted_scores[drug.0]
    }
}

/// Fraction of cohort units whose score for `drug` is at least `score`
/// (strong response ⇒ high value), computed from the frozen sorted arrays.
///
/// Observed scores always yield a value in (0, 1]; a query below the column
/// minimum returns 1 and one above the maximum returns 0.
pub fn percentile_of<S: Scalar>(dataset: &Dataset<S>, drug: DrugId, score: S) -> S {
    let sorted = dataset.sorted_drug_scores(drug);
    let below = sorted.partition_point(|s| *s < score);
    let at_or_above = sorted.len() - below;
    S::of(at_or_above as f64) / S::of(sorted.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::UnitId;

    fn row(unit: &str, drug: &str, ic50: f64) -> RawResponseRow {
        RawResponseRow {
            unit: unit.into(),
            drug: drug.into(),
            ic50,
        }
    }

    fn complete_table(units: usize, drugs: usize, f: impl Fn(usize, usize) -> f64) -> RawResponseTable {
        let mut rows = Vec::new();
        for u in 0..units {
            for d in 0..drugs {
                rows.push(row(&format!("u{u:03}"), &format!("d{d}"), f(u, d)));
            }
        }
        RawResponseTable::new(rows).unwrap()
    }

    #[test]
    fn normalize_centers_by_median_ln_ic50() {
        // IC50s {e^1, e^2, e^3} → scores {-1, 0, 1}.
        let rows = vec![
            row("a", "x", 1f64.exp()),
            row("b", "x", 2f64.exp()),
            row("c", "x", 3f64.exp()),
            row("a", "y", 1.0),
            row("b", "y", 1.0),
            row("c", "y", 1.0),
        ];
        let table = RawResponseTable::new(rows).unwrap();
        let norm = normalize_scores::<f64>(&table).unwrap();
        assert_eq!(norm.drugs, vec!["x".to_string(), "y".to_string()]);
        let x = norm.drug_column_for_test("x");
        assert!((x[0] + 1.0).abs() < 1e-12);
        assert!(x[1].abs() < 1e-12);
        assert!((x[2] - 1.0).abs() < 1e-12);
    }

    impl<S: Scalar> NormalizedResponses<S> {
        fn drug_column_for_test(&self, drug: &str) -> Vec<S> {
            let d = self.drugs.iter().position(|x| x == drug).unwrap();
            self.matrix.drug_column(d)
        }
    }

    #[test]
    fn normalize_invariant_under_positive_rescale() {
        let base = complete_table(9, 3, |u, d| ((u * 7 + d * 3) % 11 + 1) as f64);
        let scaled_rows: Vec<RawResponseRow> = base
            .rows()
            .iter()
            .map(|r| {
                let c = match r.drug.as_str() {
                    "d0" => 137.0,
                    "d1" => 0.004,
                    _ => 1.0,
                };
                row(&r.unit, &r.drug, r.ic50 * c)
            })
            .collect();
        let scaled = RawResponseTable::new(scaled_rows).unwrap();
        let a = normalize_scores::<f64>(&base).unwrap();
        let b = normalize_scores::<f64>(&scaled).unwrap();
        for u in 0..9 {
            for d in 0..3 {
                assert!((a.matrix.score(u, d) - b.matrix.score(u, d)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn full_cohort_shape_and_column_medians() {
        // 896 units, 7 drugs: shape preserved and every column median is 0.
        let table = complete_table(896, 7, |u, d| ((u * 13 + d * 29) % 97 + 1) as f64 * 0.25);
        let norm = normalize_scores::<f64>(&table).unwrap();
        assert_eq!(norm.matrix.n_units(), 896);
        assert_eq!(norm.matrix.n_drugs(), 7);
        assert!(norm.matrix.max_column_median_abs() < 1e-9);
    }

    #[test]
    fn non_positive_ic50_rejected_with_diagnostic() {
        let err = RawResponseTable::new(vec![row("a", "x", 0.0)]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains('a') && msg.contains('x'), "diagnostic names the row: {msg}");
    }

    #[test]
    fn duplicate_pair_rejected() {
        let err = RawResponseTable::new(vec![row("a", "x", 1.0), row("a", "x", 2.0)]).unwrap_err();
        assert!(matches!(err, IngestError::DuplicatePair { .. }));
    }

    fn small_features(units: &[&str], width: usize) -> FeatureTable<f64> {
        FeatureTable::new(
            units
                .iter()
                .map(|u| (u.to_string(), (0..width).map(|i| i as f64).collect()))
                .collect(),
        )
        .unwrap()
    }

    fn small_flags(units: &[&str]) -> BiomarkerTable {
        BiomarkerTable::new(
            vec!["MUT:TEST_A".into()],
            units.iter().map(|u| (u.to_string(), vec![false])).collect(),
        )
        .unwrap()
    }

    #[test]
    fn assemble_joins_consistent_tables() {
        let units = ["u0", "u1", "u2", "u3"];
        let mut rows = Vec::new();
        for (i, u) in units.iter().enumerate() {
            for d in 0..7 {
                rows.push(row(u, &format!("d{d}"), (i + d + 1) as f64));
            }
        }
        let raw = RawResponseTable::new(rows).unwrap();
        let out = Dataset::assemble(&raw, &small_features(&units, 3), &small_flags(&units)).unwrap();
        assert_eq!(out.dataset.n_units(), 4);
        assert_eq!(out.dataset.n_drugs(), 7);
        assert!(out.dropped_units.is_empty());
    }

    #[test]
    fn incomplete_unit_dropped_with_warning() {
        let units = ["u0", "u1", "u2"];
        let mut rows = Vec::new();
        for (i, u) in units.iter().enumerate() {
            for d in 0..3 {
                if *u == "u1" && d == 2 {
                    continue; // u1 lacks one drug
                }
                rows.push(row(u, &format!("d{d}"), (i + d + 1) as f64));
            }
        }
        let raw = RawResponseTable::new(rows).unwrap();
        let out = Dataset::assemble(&raw, &small_features(&units, 2), &small_flags(&units)).unwrap();
        assert_eq!(out.dataset.n_units(), 2);
        assert_eq!(out.dropped_units, vec!["u1".to_string()]);
    }

    #[test]
    fn missing_feature_row_is_an_error_naming_the_unit() {
        let units = ["u0", "u1"];
        let mut rows = Vec::new();
        for (i, u) in units.iter().enumerate() {
            for d in 0..2 {
                rows.push(row(u, &format!("d{d}"), (i + d + 1) as f64));
            }
        }
        let raw = RawResponseTable::new(rows).unwrap();
        let feats = small_features(&["u0"], 2);
        let err = Dataset::assemble(&raw, &feats, &small_flags(&units)).unwrap_err();
        match err {
            IngestError::MissingFeatures { unit } => assert_eq!(unit, "u1"),
            other => panic!("expected MissingFeatures, got {other}"),
        }
    }

    #[test]
    fn unit_order_is_sorted_by_name() {
        let rows = vec![
            row("zeta", "a", 1.0),
            row("zeta", "b", 1.0),
            row("alpha", "a", 2.0),
            row("alpha", "b", 2.0),
        ];
        let raw = RawResponseTable::new(rows).unwrap();
        let norm = normalize_scores::<f64>(&raw).unwrap();
        assert_eq!(norm.units, vec!["alpha".to_string(), "zeta".to_string()]);
    }

    #[test]
    fn percentile_matches_definition_on_small_distribution() {
        // Distribution {-2,-1,0,1}: query -2 → 1.0, query 1 → 0.25.
        let drugs = vec!["a".to_string(), "b".to_string()];
        let units: Vec<String> = (0..4).map(|i| format!("u{i}")).collect();
        // Column a becomes {-2,-1,0,1} after centering (median -0.5 built in).
        let raw = vec![
            -1.5, 0.0, //
            -0.5, 0.0, //
            0.5, 0.0, //
            1.5, 0.0,
        ];
        let ds = Dataset::from_parts(drugs, units, raw, vec![vec![]; 4], vec![], vec![vec![]; 4]).unwrap();
        let a = DrugId(0);
        assert_eq!(percentile_of(&ds, a, -2.0), 1.0);
        assert_eq!(percentile_of(&ds, a, 1.0), 0.25);
        assert_eq!(percentile_of(&ds, a, 2.0), 0.0);
    }

    #[test]
    fn percentile_matches_brute_force_on_observed_scores() {
        let table = complete_table(50, 4, |u, d| ((u * 31 + d * 17) % 23 + 1) as f64 * 0.5);
        let norm = normalize_scores::<f64>(&table).unwrap();
        let n = norm.units.len();
        let ds = Dataset::from_parts(
            norm.drugs.clone(),
            norm.units.clone(),
            (0..n).flat_map(|u| norm.matrix.unit_row(u).to_vec()).collect(),
            vec![vec![]; n],
            vec![],
            vec![vec![]; n],
        )
        .unwrap();
        for d in 0..4 {
            let drug = DrugId(d);
            let mut prev = f64::INFINITY;
            let mut scores: Vec<f64> = (0..n).map(|u| ds.score(UnitId(u), drug)).collect();
            scores.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for s in scores {
                let count = (0..n).filter(|&u| ds.score(UnitId(u), drug) >= s).count();
                let expect = count as f64 / n as f64;
                let got = percentile_of(&ds, drug, s);
                assert_eq!(got, expect, "drug {d} score {s}");
                assert!(got <= prev + 1e-15, "non-increasing in score");
                assert!(got > 0.0 && got <= 1.0);
                prev = got;
            }
        }
    }

    #[test]
    fn flag_key_grammar() {
        assert!(valid_flag_key("MUT:BRAF_V600E"));
        assert!(valid_flag_key("CNA:ERBB2_AMP"));
        assert!(!valid_flag_key("mut:braf"));
        assert!(!valid_flag_key("MUT:"));
        assert!(!valid_flag_key("MUT"));
        assert!(!valid_flag_key("MUT:BRAF V600E"));
    }
}
