//! Declarative protocol rules, the per-drug recommendation vector, and the
//! rule-based reference assignment.
//!
//! Rule files are line-oriented with `#` comments:
//!
//! ```text
//! RULE braf WHEN MUT:BRAF_V600E THEN Dabrafenib PRIORITY 1
//! RULE her2 WHEN CNA:ERBB2_AMP AND MUT:TP53_MUT THEN Trastuzumab PRIORITY 2
//! DEFAULT Cisplatin
//! ```
//!
//! Predicates are conjunctions of biomarker flags (express OR as two rules).
//! Priority 1 is highest; duplicate priorities are broken by file order. The
//! `DEFAULT` drug is mandatory: units matching no rule are assigned to it.

use thiserror::Error;

use crate::ingest::{valid_flag_key, Dataset};
use crate::num::Scalar;
use crate::types::{DrugId, UnitId};

#[derive(Debug, Error)]
pub enum RuleError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duplicate rule name `{name}`")]
    DuplicateRuleName { line: usize, name: String },
    #[error("missing DEFAULT line (every rule set needs a fallback drug)")]
    MissingDefault,
    #[error("line {line}: second DEFAULT line (only one fallback drug allowed)")]
    DuplicateDefault { line: usize },
    #[error("rule `{rule}` names drug `{drug}`, which is not in the dataset")]
    UnknownDrug { rule: String, drug: String },
    #[error("rule `{rule}` tests flag `{flag}`, which is not in the biomarker table")]
    UnknownFlag { rule: String, flag: String },
}

/// One protocol rule: a conjunction of biomarker flags recommending a drug.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub name: String,
    /// Non-empty conjunction of biomarker flag names.
    pub predicate: Vec<String>,
    pub drug: String,
    /// 1 = highest priority.
    pub priority: u32,
}

/// Ordered protocol rules plus the mandatory fallback drug.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleSet {
    pub rules: Vec<Rule>,
    pub default_drug: String,
}

impl RuleSet {
    /// Every drug named by a rule or the default, in file order, deduplicated.
    pub fn drugs_mentioned(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for rule in &self.rules {
            if !out.contains(&rule.drug) {
                out.push(rule.drug.clone());
            }
        }
        if !out.contains(&self.default_drug) {
            out.push(self.default_drug.clone());
        }
        out
    }

    /// Every flag tested by any rule, in file order, deduplicated.
    pub fn flags_mentioned(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for rule in &self.rules {
            for flag in &rule.predicate {
                if !out.contains(flag) {
                    out.push(flag.clone());
                }
            }
        }
        out
    }

    /// Resolves drug and flag names against explicit name lists.
    pub fn bind_names(&self, drugs: &[String], flags: &[String]) -> Result<BoundRuleSet, RuleError> {
        let drug_id = |rule: &str, name: &str| {
            drugs
                .iter()
                .position(|d| d == name)
                .map(DrugId)
                .ok_or_else(|| RuleError::UnknownDrug {
                    rule: rule.to_string(),
                    drug: name.to_string(),
                })
        };
        let flag_id = |rule: &str, name: &str| {
            flags
                .iter()
                .position(|f| f == name)
                .ok_or_else(|| RuleError::UnknownFlag {
                    rule: rule.to_string(),
                    flag: name.to_string(),
                })
        };
        let mut bound = Vec::with_capacity(self.rules.len());
        for rule in &self.rules {
            bound.push(BoundRule {
                name: rule.name.clone(),
                flag_ids: rule
                    .predicate
                    .iter()
                    .map(|f| flag_id(&rule.name, f))
                    .collect::<Result<_, _>>()?,
                drug: drug_id(&rule.name, &rule.drug)?,
                priority: rule.priority,
            });
        }
        Ok(BoundRuleSet {
            rules: bound,
            default_drug: drug_id("DEFAULT", &self.default_drug)?,
            n_drugs: drugs.len(),
        })
    }

    /// Resolves drug and flag names against a dataset.
    pub fn bind<S: Scalar>(&self, dataset: &Dataset<S>) -> Result<BoundRuleSet, RuleError> {
        self.bind_names(dataset.drugs(), dataset.biomarker_keys())
    }
}

/// A rule set with names resolved to dataset indices; evaluation is pure.
#[derive(Debug, Clone)]
pub struct BoundRuleSet {
    rules: Vec<BoundRule>,
    default_drug: DrugId,
    n_drugs: usize,
}

#[derive(Debug, Clone)]
struct BoundRule {
    name: String,
    flag_ids: Vec<usize>,
    drug: DrugId,
    priority: u32,
}

impl BoundRuleSet {
    pub fn default_drug(&self) -> DrugId {
        self.default_drug
    }

    pub fn n_rules(&self) -> usize {
        self.rules.len()
    }

    fn fires(&self, rule: &BoundRule, flags: &[bool]) -> bool {
        rule.flag_ids.iter().all(|&f| flags[f])
    }

    /// Names of the rules that fire for a flag row (file order).
    pub fn firing_rules(&self, flags: &[bool]) -> Vec<&str> {
        self.rules
            .iter()
            .filter(|r| self.fires(r, flags))
            .map(|r| r.name.as_str())
            .collect()
    }

    /// Multi-hot drug eligibility for a raw flag row: 1 for every drug some
    /// firing rule recommends, or a one-hot at the default drug when none do.
    pub fn recommendation_flags(&self, flags: &[bool]) -> Vec<bool> {
        let mut rec = vec![false; self.n_drugs];
        let mut any = false;
        for rule in &self.rules {
            if self.fires(rule, flags) {
                rec[rule.drug.0] = true;
                any = true;
            }
        }
        if !any {
            rec[self.default_drug.0] = true;
        }
        rec
    }

    /// Single assignment for a raw flag row: the firing rule with the lowest
    /// priority number wins, ties broken by file order; default when none fire.
    pub fn assign(&self, flags: &[bool]) -> DrugId {
        let mut best: Option<(&BoundRule, u32)> = None;
        for rule in &self.rules {
            if self.fires(rule, flags) {
                match best {
                    Some((_, p)) if p <= rule.priority => {}
                    _ => best = Some((rule, rule.priority)),
                }
            }
        }
        best.map(|(r, _)| r.drug).unwrap_or(self.default_drug)
    }
}

/// The 0/1 per-drug recommendation feature vector for one unit.
pub fn recommendation_vector<S: Scalar>(rules: &BoundRuleSet, dataset: &Dataset<S>, unit: UnitId) -> Vec<S> {
    rules
        .recommendation_flags(dataset.unit_flags(unit))
        .into_iter()
        .map(|b| if b { S::one() } else { S::zero() })
        .collect()
}

/// The reference protocol assignment for one unit. Reads biomarker flags
/// only: contexts, rewards, and history never change the answer.
pub fn guideline_act<S: Scalar>(rules: &BoundRuleSet, dataset: &Dataset<S>, unit: UnitId) -> DrugId {
    rules.assign(dataset.unit_flags(unit))
}

/// Parses the rule DSL. Line numbers in errors are 1-based.
pub fn parse_rules(text: &str) -> Result<RuleSet, RuleError> {
    let mut rules = Vec::new();
    let mut default_drug: Option<String> = None;
    let mut names = std::collections::HashSet::new();

    for (idx, raw_line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = match raw_line.split_once('#') {
            Some((before, _)) => before.trim(),
            None => raw_line.trim(),
        };
        if line.is_empty() {
            continue;
        }
        let err = |message: String| RuleError::Malformed { line: lineno, message };

        if let Some(rest) = line.strip_prefix("DEFAULT") {
            let drug = rest.trim();
            if drug.is_empty() {
                return Err(err("DEFAULT needs a drug name".into()));
            }
            if default_drug.is_some() {
                return Err(RuleError::DuplicateDefault { line: lineno });
            }
            default_drug = Some(drug.to_string());
            continue;
        }

        let rest = line
            .strip_prefix("RULE")
            .ok_or_else(|| err(format!("expected RULE or DEFAULT, found `{line}`")))?
            .trim_start();
        let (name, rest) = rest
            .split_once(char::is_whitespace)
            .ok_or_else(|| err("RULE needs a name".into()))?;
        if !names.insert(name.to_string()) {
            return Err(RuleError::DuplicateRuleName {
                line: lineno,
                name: name.to_string(),
            });
        }
        let rest = rest.trim_start();
        let rest = rest
            .strip_prefix("WHEN")
            .ok_or_else(|| err("expected WHEN after the rule name".into()))?
            .trim_start();
        let (predicate_text, rest) = rest
            .split_once(" THEN ")
            .ok_or_else(|| err("expected THEN <drug> after the predicate".into()))?;
        let (drug, priority_text) = rest
            .rsplit_once(" PRIORITY ")
            .ok_or_else(|| err("expected PRIORITY <int> after the drug".into()))?;
        let drug = drug.trim();
        if drug.is_empty() {
            return Err(err("THEN needs a drug name".into()));
        }
        let priority: u32 = priority_text
            .trim()
            .parse()
            .map_err(|_| err(format!("priority must be a positive integer, found `{}`", priority_text.trim())))?;
        if priority == 0 {
            return Err(err("priority must be >= 1 (1 is highest)".into()));
        }
        let mut predicate = Vec::new();
        for flag in predicate_text.split(" AND ") {
            let flag = flag.trim();
            if !valid_flag_key(flag) {
                return Err(err(format!("flag `{flag}` does not match PREFIX:Name")));
            }
            predicate.push(flag.to_string());
        }
        if predicate.is_empty() {
            return Err(err("WHEN needs at least one flag".into()));
        }
        rules.push(Rule {
            name: name.to_string(),
            predicate,
            drug: drug.to_string(),
            priority,
        });
    }

    Ok(RuleSet {
        rules,
        default_drug: default_drug.ok_or(RuleError::MissingDefault)?,
    })
}
