//! Seeded synthetic cohorts with a planted linear signal.
//!
//! Scores are a per-drug linear function of the unit's features plus noise,
//! optionally lowered (improved) for drugs recommended by a supplied rule
//! set whenever the unit's flags fire that rule. The rule bonus is not a
//! function of the features, so guideline-following is informative but
//! suboptimal against an agent that exploits the full feature vector.

use rand::Rng;

use super::{Dataset, IngestError, ResponseMatrix};
use crate::guidelines::RuleSet;
use crate::num::Scalar;
use crate::rng::{derive_stream, draw_standard_normal, RngSeed};
use crate::types::DrugId;

/// Shape and signal parameters for a synthetic cohort.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub n_units: usize,
    pub n_drugs: usize,
    pub feature_dim: usize,
    /// Standard deviation of the additive score noise.
    pub noise: f64,
    /// Score reduction applied to a drug recommended by a firing rule.
    pub rule_bonus: f64,
    /// Marginal probability that any biomarker flag is set.
    pub flag_density: f64,
}

impl SynthSpec {
    pub fn new(n_units: usize, n_drugs: usize, feature_dim: usize) -> SynthSpec {
        SynthSpec {
            n_units,
            n_drugs,
            feature_dim,
            noise: 0.1,
            rule_bonus: 1.5,
            flag_density: 0.2,
        }
    }

    pub fn with_noise(mut self, noise: f64) -> SynthSpec {
        self.noise = noise;
        self
    }
}

/// Ground truth behind a synthetic cohort.
#[derive(Debug, Clone)]
pub struct PlantedTruth<S: Scalar> {
    /// Per-drug linear coefficients over the features (k × dim).
    pub coefficients: Vec<Vec<S>>,
    /// Bonus subtracted from a recommended drug's score when a rule fires.
    pub rule_bonus: S,
    /// Per-unit argmin of the noiseless centered score.
    pub best_arm: Vec<DrugId>,
    /// Noiseless centered scores (same shape as the dataset matrix).
    pub signal: ResponseMatrix<S>,
}

/// Generates a seeded synthetic cohort and its planted truth.
///
/// With `spec.noise == 0` the planted best arm attains the strict minimum
/// score for every unit. Same `(spec, rules, seed)` → identical output.
pub fn synthesize_dataset<S: Scalar>(
    spec: &SynthSpec,
    rules: Option<&RuleSet>,
    seed: RngSeed,
) -> Result<(Dataset<S>, PlantedTruth<S>), IngestError> {
    let (n, k, dim) = (spec.n_units, spec.n_drugs, spec.feature_dim);
    assert!(k >= 2, "need at least 2 drugs");
    assert!(n >= k, "need at least as many units as drugs");
    assert!(dim >= 1, "need at least one feature dimension");

    let drugs = drug_names(k, rules)?;
    let digits = (n.max(10) - 1).to_string().len();
    let units: Vec<String> = (0..n).map(|u| format!("unit_{u:0digits$}")).collect();

    let flag_keys: Vec<String> = match rules {
        Some(rs) => {
            let mut keys = rs.flags_mentioned();
            keys.sort();
            keys
        }
        None => vec!["CNA:SYN_B".to_string(), "MUT:SYN_A".to_string()],
    };

    // Independent streams per ingredient so shapes don't interact.
    let mut feat_rng = derive_stream(seed, "features");
    let features: Vec<Vec<S>> = (0..n)
        .map(|_| (0..dim).map(|_| draw_standard_normal(&mut feat_rng)).collect())
        .collect();

    let mut coef_rng = derive_stream(seed, "coefficients");
    let scale = S::of(1.0 / (dim as f64).sqrt());
    let coefficients: Vec<Vec<S>> = (0..k)
        .map(|_| {
            (0..dim)
                .map(|_| scale * draw_standard_normal::<S>(&mut coef_rng))
                .collect()
        })
        .collect();

    let mut flag_rng = derive_stream(seed, "flags");
    let flags: Vec<Vec<bool>> = (0..n)
        .map(|_| (0..flag_keys.len()).map(|_| flag_rng.random_range(0.0..1.0) < spec.flag_density).collect())
        .collect();

    let bound = rules.map(|rs| rs.bind_names(&drugs, &flag_keys)).transpose()?;

    let mut signal: Vec<S> = Vec::with_capacity(n * k);
    for u in 0..n {
        let rec = bound.as_ref().map(|b| b.recommendation_flags(&flags[u]));
        let fired = bound.as_ref().map_or(false, |b| !b.firing_rules(&flags[u]).is_empty());
        for (d, coef) in coefficients.iter().enumerate() {
            let mut s: S = coef.iter().zip(&features[u]).map(|(c, x)| *c * *x).sum();
            // The default drug carries no bonus: only firing rules plant one.
            if fired && rec.as_ref().is_some_and(|r| r[d]) {
                s -= S::of(spec.rule_bonus);
            }
            signal.push(s);
        }
    }

    let mut noise_rng = derive_stream(seed, "reward-noise");
    let noise_scale = S::of(spec.noise);
    let noisy: Vec<S> = signal
        .iter()
        .map(|s| *s + noise_scale * draw_standard_normal::<S>(&mut noise_rng))
        .collect();

    let signal_matrix = ResponseMatrix::from_raw_scores(n, k, signal);
    let best_arm = (0..n)
        .map(|u| DrugId(crate::num::argmin(signal_matrix.unit_row(u))))
        .collect();

    let dataset = Dataset::from_parts(drugs, units, noisy, features, flag_keys, flags)?;
    Ok((
        dataset,
        PlantedTruth {
            coefficients,
            rule_bonus: S::of(spec.rule_bonus),
            best_arm,
            signal: signal_matrix,
        },
    ))
}

/// Drug name list: rule-mentioned drugs first (so binding succeeds), padded
/// with `drug_XX` names, then sorted for a deterministic index order.
fn drug_names(k: usize, rules: Option<&RuleSet>) -> Result<Vec<String>, IngestError> {
    let mut names = rules.map(|r| r.drugs_mentioned()).unwrap_or_default();
    if names.len() > k {
        return Err(IngestError::TooFewDrugs { found: k });
    }
    let mut next = 0usize;
    while names.len() < k {
        let candidate = format!("drug_{next:02}");
        if !names.contains(&candidate) {
            names.push(candidate);
        }
        next += 1;
    }
    names.sort();
    Ok(names)
}
